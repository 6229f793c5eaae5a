#ifndef OPPLAB_CALIBRATION_HPP
#define OPPLAB_CALIBRATION_HPP

#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <string>

#include <json.hpp>

#include "errors.hpp"

#ifndef OPPLAB_DEFAULT_CALIBRATION
#define OPPLAB_DEFAULT_CALIBRATION "data/calibration.json"
#endif

namespace opplab {

// Frozen constants for the asymptotic relations (observed maxima with a
// safety margin, regenerated by `opplab calibrate`).
struct Calibration {
    std::string path;
    int version = 0;
    std::map<std::string, double> constants;

    double get(const std::string& name) const {
        auto it = constants.find(name);
        if (it == constants.end()) throw CalibrationMissing("calibration constant '" + name + "' missing from " + path);
        return it->second;
    }

    static Calibration load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw CalibrationMissing("cannot open calibration file " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw CalibrationMissing("malformed calibration file " + path + ": " + e.what());
        }
        Calibration c;
        c.path = path;
        c.version = j.value("version", 0);
        if (!j.contains("constants") || !j["constants"].is_object()) throw CalibrationMissing("calibration file lacks \"constants\"");
        for (auto it = j["constants"].begin(); it != j["constants"].end(); ++it) c.constants[it.key()] = it.value().get<double>();
        return c;
    }
};

inline std::string calibration_path() {
    const char* env = std::getenv("OPPLAB_CALIBRATION");
    return env && *env ? std::string(env) : std::string(OPPLAB_DEFAULT_CALIBRATION);
}

inline const Calibration& calibration() {
    static std::once_flag once;
    static Calibration cal;
    static std::string error;
    std::call_once(once, [] {
        try {
            cal = Calibration::load(calibration_path());
        } catch (const CalibrationMissing& e) {
            error = e.what();
        }
    });
    if (!error.empty()) throw CalibrationMissing(error);
    return cal;
}

inline double calibrated(const std::string& name) { return calibration().get(name); }

}  // namespace opplab

#endif
