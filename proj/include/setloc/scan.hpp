#pragma once

// Core domain records: one RSSI scan and the building/floor tag map.

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace setloc {

struct Detection {
    std::string bssid;  // canonical lowercase MAC
    double rssi = 0.0;  // dBm, in [-100, 0] after validation
};

struct Scan {
    std::string id;
    std::vector<Detection> detections;
    double x = 0.0;  // meters, local planar frame
    double y = 0.0;
    std::optional<int> floor;
    std::optional<std::string> building;
    std::optional<std::string> timestamp;
};

struct TagMap {
    struct BuildingInfo {
        std::vector<int> floors;
        double area_m2 = 0.0;
    };
    std::map<std::string, BuildingInfo> buildings;
};

std::string canonical_bssid(const std::string& raw);

}  // namespace setloc
