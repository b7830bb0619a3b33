// Temporary experiment harness for E2 world-shape tuning. Not installed.
#include <cstdlib>
#include <iostream>

#include "setloc/evaluation.hpp"
#include "setloc/rng.hpp"
#include "setloc/synthetic.hpp"
#include "setloc/training.hpp"

using namespace setloc;

int main(int argc, char** argv) {
    const double ple = argc > 1 ? std::atof(argv[1]) : 3.5;
    const double noise = argc > 2 ? std::atof(argv[2]) : 4.0;
    const int n_scans = argc > 3 ? std::atoi(argv[3]) : 600;
    const int aps = argc > 4 ? std::atoi(argv[4]) : 20;
    const uint64_t seed = argc > 5 ? std::strtoull(argv[5], nullptr, 10) : 7;
    const int epochs = argc > 6 ? std::atoi(argv[6]) : 50;

    // Build 3 disjoint buildings 150 m apart, like default_e2_worlds but
    // with knobs exposed.
    std::vector<Scan> all;
    TagMap tags;
    const char* names[] = {"hall_a", "hall_b", "hall_c"};
    for (int b = 0; b < 3; ++b) {
        SynthWorld world;
        world.building = names[b];
        world.path_loss_exponent = ple;
        world.noise_sigma_db = noise;
        {
            auto rng = make_rng(derive_seed(seed, 0xb00 + uint64_t(b)));
            const int grid_cols = 6, grid_rows = (aps + grid_cols - 1) / grid_cols;
            std::uniform_real_distribution<double> jitter(-2.0, 2.0);
            int placed = 0;
            for (int r = 0; r < grid_rows && placed < aps; ++r) {
                for (int c = 0; c < grid_cols && placed < aps; ++c) {
                    SynthWorld::Ap ap;
                    ap.x = std::clamp((c + 0.5) * world.width / grid_cols + jitter(rng), 0.0,
                                      world.width);
                    ap.y = std::clamp((r + 0.5) * world.height / grid_rows + jitter(rng), 0.0,
                                      world.height);
                    ap.floor = 1;
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), "02:53:4c:%02x:01:%02x", b, placed);
                    ap.bssid = buf;
                    world.aps.push_back(ap);
                    ++placed;
                }
            }
        }
        auto scans = generate_synthetic(world, n_scans / 3, derive_seed(seed, 0xd2 + b));
        for (auto& s : scans) {
            s.x += 150.0 * b;
            s.id = std::string(names[b]) + "_" + s.id;
            all.push_back(std::move(s));
        }
    }

    ExperimentSpec spec = ExperimentSpec::standard(ExperimentId::e2, derive_seed(seed, 0x511));
    ExperimentData data = assemble_experiment(all, spec);
    std::cout << "train=" << data.train.size() << " val=" << data.val.size()
              << " test=" << data.test.size() << "\n";

    for (Arch arch : {Arch::mlp, Arch::lstm, Arch::set_transformer}) {
        Vocabulary vocab = build_vocabulary(data.train);
        auto model = make_model(ModelConfig::defaults(arch), vocab, derive_seed(seed, 0x1217));
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.accumulation_window = 1;
        cfg.seed = derive_seed(seed, 0x517);
        TrainResult result = train(*model, data, cfg);
        Metrics m = evaluate(*model, data.test, result.stats);
        std::printf("%-16s test %.2f ± %.2f m (best epoch %d of %d)\n", to_string(arch).c_str(),
                    m.mean_error_m, m.std_error_m, result.best_epoch, result.epochs_run);
        if (std::getenv("SCRATCH_HISTORY")) {
            std::printf("  val:");
            for (const auto& row : result.history) {
                std::printf(" %.2f", row.val_error_m);
            }
            std::printf("\n  train_loss:");
            for (const auto& row : result.history) {
                std::printf(" %.4f", row.train_loss);
            }
            std::printf("\n");
        }
    }
    return 0;
}
