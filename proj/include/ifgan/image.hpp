#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ifgan/rng.hpp"
#include "ifgan/tensor.hpp"

namespace ifgan {

struct Image8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> px;  // row-major

    std::uint8_t at(int x, int y) const { return px[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return px[static_cast<std::size_t>(y) * width + x]; }
    static Image8 filled(int w, int h, std::uint8_t v);
};

struct ImageF {
    int width = 0;
    int height = 0;
    std::vector<double> px;  // intensities in [0, 255]

    double at(int x, int y) const { return px[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return px[static_cast<std::size_t>(y) * width + x]; }
    static ImageF filled(int w, int h, double v);
};

ImageF to_float(const Image8& img);
Image8 to_u8(const ImageF& img);  // clamp + round

// binary PGM (P5, maxval 255)
Image8 read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Image8& img);

// CDF remap v' = round(255*cdf(v)/count) with inclusive cdf; constant
// images map to 0 by convention.
Image8 hist_equalize(const Image8& img);

struct Point {
    double x = 0;
    double y = 0;
};

// p -> (a*x - b*y + tx, b*x + a*y + ty): rotation+scale (a,b) and shift
struct Similarity {
    double a = 1, b = 0, tx = 0, ty = 0;

    Point apply(Point p) const { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }
    double scale() const;
    double rotation_deg() const;
    Similarity inverse() const;
};

// least-squares similarity mapping src[i] -> dst[i]
Similarity fit_similarity(const std::vector<Point>& src, const std::vector<Point>& dst);

// triangle area test relative to the squared point spread
bool near_collinear(const std::array<Point, 3>& pts, double tol = 2e-2);

// bilinear sample with zero outside; pixel centers at integer coordinates
double sample_bilinear(const ImageF& img, double x, double y);

// out(x,y) = src(fwd^-1(x,y))
ImageF warp_similarity(const ImageF& src, const Similarity& fwd, int out_w, int out_h);

ImageF resize_bilinear(const ImageF& src, int out_w, int out_h);
ImageF rotate_about_center(const ImageF& src, double degrees);
ImageF crop(const ImageF& src, int x0, int y0, int w, int h);
ImageF flip_horizontal(const ImageF& src);

// [0,255] -> [-1,1] tensor of shape [1,1,h,w], and back
Tensor image_to_unit_tensor(const ImageF& img);
ImageF unit_tensor_to_image(const Tensor& t);  // expects [1,1,h,w] or [1,h,w]

}  // namespace ifgan
