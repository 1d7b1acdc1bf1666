#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ringtex/csv.hpp"
#include "ringtex/errors.hpp"
#include "ringtex/image_io.hpp"
#include "ringtex/surface_image.hpp"
#include "ringtex/time_series.hpp"

namespace ringtex {

// One surface's measurement bundle: three traces, a photo, metadata.
struct TextureRecording {
    std::string name;
    TimeSeries press_force;   // [N]
    TimeSeries skin_temp;     // [degC]
    TimeSeries heat_flux;     // [W/m2]
    SurfaceImage image;
    std::optional<double> thermal_conductivity;  // [W/(m K)]
    std::vector<std::string> warnings;           // non-fatal ingestion notes
};

namespace detail {

inline const nlohmann::json& manifest_key(const nlohmann::json& j, const char* key,
                                          const std::string& context) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw ManifestError("manifest missing key '" + std::string(key) + "': " + context);
    }
    return *it;
}

}  // namespace detail

// Manifest: JSON object naming the trace files (relative to the manifest),
// the image, mm_per_pixel, and an optional conductivity hint.
inline TextureRecording load_recording(const std::filesystem::path& manifest_path) {
    const std::string context = manifest_path.string();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("manifest parse failed: " + std::string(e.what()) + ": " + context);
    }
    if (!j.is_object()) {
        throw ManifestError("manifest is not a JSON object: " + context);
    }
    const auto dir = manifest_path.parent_path();
    auto path_of = [&](const char* key) {
        const auto& v = detail::manifest_key(j, key, context);
        if (!v.is_string()) {
            throw ManifestError("manifest key '" + std::string(key) + "' must be a string: " +
                                context);
        }
        return dir / v.get<std::string>();
    };
    const auto& scale = detail::manifest_key(j, "mm_per_pixel", context);
    if (!scale.is_number() || !(scale.get<double>() > 0.0)) {
        throw ManifestError("mm_per_pixel must be a positive number: " + context);
    }

    TextureRecording rec{
        detail::manifest_key(j, "name", context).get<std::string>(),
        load_series_csv(path_of("force_csv"), Unit::Newton),
        load_series_csv(path_of("skin_temp_csv"), Unit::Celsius),
        load_series_csv(path_of("heat_flux_csv"), Unit::WattPerM2),
        load_surface_image(path_of("image"), scale.get<double>()),
        std::nullopt,
        {},
    };
    if (auto it = j.find("thermal_conductivity_w_mk"); it != j.end()) {
        rec.thermal_conductivity = it->get<double>();
    }
    for (double f : rec.press_force.values()) {
        if (f < 0.0) {
            throw IngestionError("negative force sample in recording '" + rec.name + "'");
        }
    }
    for (double t : rec.skin_temp.values()) {
        if (t < 15.0 || t > 45.0) {
            rec.warnings.push_back("skin temperature " + format_double(t) +
                                   " degC outside physiological range [15, 45]");
            break;
        }
    }
    return rec;
}

// Writes the canonical file set for a recording and returns the manifest
// path. File names derive from the recording name.
inline std::filesystem::path save_recording(const std::filesystem::path& dir,
                                            const TextureRecording& rec) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_series_csv(dir / (rec.name + "_force.csv"), rec.press_force);
    save_series_csv(dir / (rec.name + "_skin_temp.csv"), rec.skin_temp);
    save_series_csv(dir / (rec.name + "_heat_flux.csv"), rec.heat_flux);
    save_pgm(dir / (rec.name + "_image.pgm"), rec.image);

    nlohmann::json j;
    j["name"] = rec.name;
    j["force_csv"] = rec.name + "_force.csv";
    j["skin_temp_csv"] = rec.name + "_skin_temp.csv";
    j["heat_flux_csv"] = rec.name + "_heat_flux.csv";
    j["image"] = rec.name + "_image.pgm";
    j["mm_per_pixel"] = rec.image.mm_per_pixel;
    if (rec.thermal_conductivity) {
        j["thermal_conductivity_w_mk"] = *rec.thermal_conductivity;
    }
    const fs::path manifest = dir / (rec.name + "_manifest.json");
    write_file_atomic(manifest, j.dump(2) + "\n");
    return manifest;
}

}  // namespace ringtex
