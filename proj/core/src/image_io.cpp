#include "lfc/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "lfc/color.hpp"

namespace lfc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string lower_ext(const fs::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

int read_pnm_token(std::istream& in) {
  // Skips whitespace and '#' comments per the PNM grammar.
  while (in) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  return value;
}

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

PnmHeader read_pnm_header(std::istream& in, const fs::path& path) {
  PnmHeader h;
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  h.magic = {m0, m1};
  h.width = read_pnm_token(in);
  h.height = read_pnm_token(in);
  h.maxval = read_pnm_token(in);
  in.get();  // single whitespace before raster
  if (!in || h.width <= 0 || h.height <= 0 || h.maxval != 255) {
    throw FormatError("unsupported PNM header in " + path.string());
  }
  return h;
}

// ---- PNG via libpng --------------------------------------------------------

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

RgbImage load_png_rgb(const fs::path& path) {
  PngReader r;
  r.fp = std::fopen(path.string().c_str(), "rb");
  if (!r.fp) throw FormatError("cannot open " + path.string());
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  r.info = png_create_info_struct(r.png);
  if (setjmp(png_jmpbuf(r.png))) throw FormatError("libpng failed on " + path.string());
  png_init_io(r.png, r.fp);
  png_read_info(r.png, r.info);
  png_set_expand(r.png);
  png_set_strip_16(r.png);
  png_set_strip_alpha(r.png);
  png_set_gray_to_rgb(r.png);
  png_read_update_info(r.png, r.info);
  const int w = static_cast<int>(png_get_image_width(r.png, r.info));
  const int h = static_cast<int>(png_get_image_height(r.png, r.info));
  RgbImage img(w, h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = img.rgb.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(r.png, rows.data());
  return img;
}

void save_png(const uint8_t* data, int width, int height, int channels, const fs::path& path) {
  PngWriter w;
  w.fp = std::fopen(path.string().c_str(), "wb");
  if (!w.fp) throw FormatError("cannot write " + path.string());
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  w.info = png_create_info_struct(w.png);
  if (setjmp(png_jmpbuf(w.png))) throw FormatError("libpng failed writing " + path.string());
  png_init_io(w.png, w.fp);
  png_set_IHDR(w.png, w.info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(data + static_cast<size_t>(y) * width * channels);
  }
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

bool png_is_color(const fs::path& path) {
  PngReader r;
  r.fp = std::fopen(path.string().c_str(), "rb");
  if (!r.fp) throw FormatError("cannot open " + path.string());
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  r.info = png_create_info_struct(r.png);
  if (setjmp(png_jmpbuf(r.png))) throw FormatError("libpng failed on " + path.string());
  png_init_io(r.png, r.fp);
  png_read_info(r.png, r.info);
  const int color_type = png_get_color_type(r.png, r.info);
  return (color_type & PNG_COLOR_MASK_COLOR) != 0;
}

}  // namespace

std::string LfManifest::filename(AngularPos p) const {
  std::string name = replace_all(pattern, "{u}", std::to_string(p.u));
  return replace_all(name, "{v}", std::to_string(p.v));
}

LfManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("manifest parse error in " + path.string() + ": " + e.what());
  }
  LfManifest m;
  m.grid_rows = j.at("grid_rows").get<int>();
  m.grid_cols = j.at("grid_cols").get<int>();
  m.pattern = j.at("pattern").get<std::string>();
  if (m.grid_rows <= 0 || m.grid_cols <= 0 || m.pattern.empty()) {
    throw FormatError("manifest fields out of range in " + path.string());
  }
  return m;
}

void save_manifest(const LfManifest& m, const fs::path& path) {
  json j;
  j["grid_rows"] = m.grid_rows;
  j["grid_cols"] = m.grid_cols;
  j["pattern"] = m.pattern;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest " + path.string());
  out << j.dump(2) << "\n";
}

Plane8 load_gray(const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    RgbImage rgb = load_png_rgb(path);
    View v = rgb_to_ycbcr420(rgb);
    return v.y;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const PnmHeader h = read_pnm_header(in, path);
  if (h.magic == "P5") {
    Plane8 img(h.width, h.height);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!in) throw FormatError("truncated PGM " + path.string());
    return img;
  }
  if (h.magic == "P6") {
    View v = rgb_to_ycbcr420(load_rgb(path));
    return v.y;
  }
  throw FormatError("unsupported PNM magic in " + path.string());
}

RgbImage load_rgb(const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return load_png_rgb(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const PnmHeader h = read_pnm_header(in, path);
  if (h.magic == "P6") {
    RgbImage img(h.width, h.height);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!in) throw FormatError("truncated PPM " + path.string());
    return img;
  }
  if (h.magic == "P5") {
    Plane8 gray(h.width, h.height);
    in.read(reinterpret_cast<char*>(gray.data.data()), static_cast<std::streamsize>(gray.data.size()));
    if (!in) throw FormatError("truncated PGM " + path.string());
    RgbImage img(h.width, h.height);
    for (int y = 0; y < h.height; ++y) {
      for (int x = 0; x < h.width; ++x) {
        uint8_t* px = img.pixel(x, y);
        px[0] = px[1] = px[2] = gray.at(x, y);
      }
    }
    return img;
  }
  throw FormatError("unsupported PNM magic in " + path.string());
}

void save_gray(const Plane8& img, const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    save_png(img.data.data(), img.width, img.height, 1, path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

void save_rgb(const RgbImage& img, const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    save_png(img.rgb.data(), img.width, img.height, 3, path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

bool is_color_image(const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".pgm") return false;
  if (ext == ".ppm") return true;
  if (ext == ".png") return png_is_color(path);
  throw FormatError("unsupported image extension " + ext);
}

LightField load_light_field(const fs::path& manifest_path) {
  const LfManifest m = load_manifest(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  LightField lf(m.grid_rows, m.grid_cols);
  int vw = -1, vh = -1;
  for (int u = 0; u < m.grid_rows; ++u) {
    for (int v = 0; v < m.grid_cols; ++v) {
      const fs::path file = dir / m.filename({u, v});
      View view;
      if (is_color_image(file)) {
        view = rgb_to_ycbcr420(load_rgb(file));
      } else {
        Plane8 gray = load_gray(file);
        view = View(gray.width, gray.height);
        view.y = std::move(gray);
      }
      if (vw < 0) {
        vw = view.width();
        vh = view.height();
      } else if (view.width() != vw || view.height() != vh) {
        throw FormatError("light field views have mismatched dimensions: " + file.string());
      }
      lf.at({u, v}) = std::move(view);
    }
  }
  return lf;
}

void save_light_field(const LightField& lf, const fs::path& manifest_path, const std::string& pattern) {
  LfManifest m;
  m.grid_rows = lf.grid_rows;
  m.grid_cols = lf.grid_cols;
  m.pattern = pattern;
  const fs::path dir = manifest_path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  const bool color = lower_ext(fs::path(pattern)) != ".pgm";
  for (int u = 0; u < lf.grid_rows; ++u) {
    for (int v = 0; v < lf.grid_cols; ++v) {
      const fs::path file = dir / m.filename({u, v});
      if (color) {
        save_rgb(ycbcr420_to_rgb(lf.at({u, v})), file);
      } else {
        save_gray(lf.at({u, v}).y, file);
      }
    }
  }
  save_manifest(m, manifest_path);
}

}  // namespace lfc
