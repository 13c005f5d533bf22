#pragma once

#include <filesystem>
#include <string>

#include "lfc/image.hpp"

namespace lfc {

/// Grid geometry plus a filename pattern with {u} and {v} placeholders,
/// e.g. "view_{u}_{v}.pgm". Stored as JSON next to the view files.
struct LfManifest {
  int grid_rows = 0;
  int grid_cols = 0;
  std::string pattern;

  std::string filename(AngularPos p) const;
};

LfManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const LfManifest& m, const std::filesystem::path& path);

/// Load / store a full light field through its manifest. Grayscale files
/// yield neutral chroma; color files are converted to YCbCr 4:2:0.
LightField load_light_field(const std::filesystem::path& manifest_path);
void save_light_field(const LightField& lf, const std::filesystem::path& manifest_path,
                      const std::string& pattern = "view_{u}_{v}.pgm");

// Single-image codecs, selected by file extension (.pgm, .ppm, .png).
Plane8 load_gray(const std::filesystem::path& path);
RgbImage load_rgb(const std::filesystem::path& path);
void save_gray(const Plane8& img, const std::filesystem::path& path);
void save_rgb(const RgbImage& img, const std::filesystem::path& path);

/// True when the file stores color samples (PPM, or PNG with color channels).
bool is_color_image(const std::filesystem::path& path);

}  // namespace lfc
