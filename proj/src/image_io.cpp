#include "msdat/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

#include "msdat/error.hpp"

namespace msdat {

Tensor load_image(const std::filesystem::path& path) {
  const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) throw DataError("cannot decode image " + path.string());
  Tensor out(mat.rows, mat.cols, 3);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < mat.cols; ++x) {
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = row[x][c];
    }
  }
  return out;
}

void save_image(const std::filesystem::path& path, const Tensor& image) {
  if (image.channels() != 1 && image.channels() != 3) throw ConfigError("save_image: need 1 or 3 channels");
  cv::Mat mat(image.height(), image.width(), image.channels() == 3 ? CV_8UC3 : CV_8UC1);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = mat.ptr<unsigned char>(y);
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        const float v = std::clamp(std::round(image.at(c, y, x)), 0.0f, 255.0f);
        row[x * image.channels() + c] = static_cast<unsigned char>(v);
      }
    }
  }
  if (!cv::imwrite(path.string(), mat)) throw DataError("cannot write image " + path.string());
}

}  // namespace msdat
