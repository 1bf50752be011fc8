#include "vdnet/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vdnet/box.hpp"

namespace vdnet {

std::string to_string(const Box& b) {
  std::ostringstream os;
  os << '[' << b.x_min << ',' << b.y_min << ',' << b.x_max << ',' << b.y_max << ']';
  return os.str();
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_separators() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_separators();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (++digits > 9) throw FormatError(std::string("pnm header: ") + what + " too large");
      ++pos_;
    }
    if (digits == 0) throw FormatError(std::string("pnm header: missing ") + what);
    return value;
  }

  std::size_t pos_ = 0;
  std::string_view bytes_;
};

}  // namespace

Image8 decode_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    throw FormatError("pnm header: expected magic P6 or P5");
  }
  HeaderReader reader(bytes);
  reader.pos_ = 2;
  Image8 image;
  image.channels = bytes[1] == '6' ? 3 : 1;
  image.width = reader.number("width");
  image.height = reader.number("height");
  const std::size_t maxval = reader.number("maxval");
  if (image.width == 0 || image.height == 0) throw FormatError("pnm header: zero image extent");
  if (maxval != 255) {
    throw FormatError("pnm header: maxval " + std::to_string(maxval) + " unsupported (need 255)");
  }
  if (reader.pos_ >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[reader.pos_]))) {
    throw FormatError("pnm header: missing separator before payload");
  }
  const std::size_t start = reader.pos_ + 1;
  const std::size_t expected = image.width * image.height * image.channels;
  if (bytes.size() - start < expected) {
    throw FormatError("pnm payload truncated: expected " + std::to_string(expected) +
                      " bytes, found " + std::to_string(bytes.size() - start));
  }
  image.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                      bytes.begin() + static_cast<std::ptrdiff_t>(start + expected));
  return image;
}

std::string encode_pnm(const Image8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ValueError("pnm: only 1 or 3 channels can be written, got " +
                     std::to_string(image.channels));
  }
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw ShapeError("pnm: pixel buffer does not match image extent");
  }
  std::string out = (image.channels == 3 ? "P6\n" : "P5\n") + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

Image8 read_pnm_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pnm(bytes);
}

void write_pnm_file(const std::filesystem::path& path, const Image8& image) {
  const std::string bytes = encode_pnm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Tensor image_to_tensor(const Image8& image) {
  const std::size_t plane = image.width * image.height;
  std::vector<double> data(image.channels * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < image.channels; ++c) {
      data[c * plane + p] = image.pixels[p * image.channels + c] / 255.0;
    }
  }
  return Tensor({image.channels, image.height, image.width}, std::move(data));
}

Image8 tensor_to_image(const Tensor& tensor) {
  Image8 image;
  if (tensor.rank() == 2) {
    image.channels = 1;
    image.height = tensor.dim(0);
    image.width = tensor.dim(1);
  } else if (tensor.rank() == 3) {
    image.channels = tensor.dim(0);
    image.height = tensor.dim(1);
    image.width = tensor.dim(2);
  } else {
    throw ShapeError("image tensor must be [c,h,w] or [h,w], got " + shape_to_string(tensor.shape()));
  }
  const std::size_t plane = image.width * image.height;
  image.pixels.resize(plane * image.channels);
  auto v = tensor.data();
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < image.channels; ++c) {
      const double q = std::round(v[c * plane + p] * 255.0);
      image.pixels[p * image.channels + c] = static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
    }
  }
  return image;
}

Image8 normalized_grey(const Tensor& map) {
  if (map.rank() != 2) throw ShapeError("normalized_grey expects [h,w], got " + shape_to_string(map.shape()));
  auto v = map.data();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double span = *hi - *lo;
  std::vector<double> scaled(v.size(), 0.0);
  if (span > 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) scaled[i] = (v[i] - *lo) / span;
  }
  return tensor_to_image(Tensor(map.shape(), std::move(scaled)));
}

Tensor read_ppm(const std::filesystem::path& path) {
  Image8 image = read_pnm_file(path);
  if (image.channels != 3) throw FormatError(path.string() + " is not a P6 image");
  return image_to_tensor(image);
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  Image8 img = tensor_to_image(image);
  if (img.channels == 1) {
    // Grey images are widened so overlays and masked images stay viewable as PPM.
    Image8 rgb{img.width, img.height, 3, {}};
    rgb.pixels.reserve(img.pixels.size() * 3);
    for (std::uint8_t p : img.pixels) rgb.pixels.insert(rgb.pixels.end(), 3, p);
    img = std::move(rgb);
  }
  write_pnm_file(path, img);
}

Tensor read_pgm(const std::filesystem::path& path) {
  Image8 image = read_pnm_file(path);
  if (image.channels != 1) throw FormatError(path.string() + " is not a P5 image");
  return image_to_tensor(image);
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  Image8 img = tensor_to_image(image);
  if (img.channels != 1) throw ShapeError("write_pgm needs a single channel image");
  write_pnm_file(path, img);
}

}  // namespace vdnet
