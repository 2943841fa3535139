#include "ifgan/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ifgan {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Image8 Image8::filled(int w, int h, std::uint8_t v) {
    Image8 img;
    img.width = w;
    img.height = h;
    img.px.assign(static_cast<std::size_t>(w) * h, v);
    return img;
}

ImageF ImageF::filled(int w, int h, double v) {
    ImageF img;
    img.width = w;
    img.height = h;
    img.px.assign(static_cast<std::size_t>(w) * h, v);
    return img;
}

ImageF to_float(const Image8& img) {
    ImageF out;
    out.width = img.width;
    out.height = img.height;
    out.px.assign(img.px.begin(), img.px.end());
    return out;
}

Image8 to_u8(const ImageF& img) {
    Image8 out;
    out.width = img.width;
    out.height = img.height;
    out.px.resize(img.px.size());
    for (std::size_t i = 0; i < img.px.size(); ++i) {
        const double v = std::llround(img.px[i]);
        out.px[i] = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
    }
    return out;
}

Image8 read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error(path + ": not a binary PGM (P5)");
    auto next_int = [&in, &path]() {
        // skip whitespace and '#' comment lines
        int c = in.get();
        while (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '#') {
            if (c == '#')
                while (c != '\n' && c != EOF) c = in.get();
            c = in.get();
        }
        int v = 0;
        bool any = false;
        while (c >= '0' && c <= '9') {
            v = v * 10 + (c - '0');
            any = true;
            c = in.get();
        }
        if (!any) throw std::runtime_error(path + ": malformed PGM header");
        return v;
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    if (maxval != 255) throw std::runtime_error(path + ": PGM maxval must be 255");
    Image8 img = Image8::filled(w, h, 0);
    in.read(reinterpret_cast<char*>(img.px.data()), static_cast<std::streamsize>(img.px.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.px.size()))
        throw std::runtime_error(path + ": truncated PGM payload");
    return img;
}

void write_pgm(const std::string& path, const Image8& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.px.data()),
              static_cast<std::streamsize>(img.px.size()));
    if (!out) throw std::runtime_error("short write: " + path);
}

Image8 hist_equalize(const Image8& img) {
    const std::size_t count = img.px.size();
    std::array<std::size_t, 256> hist{};
    for (std::uint8_t v : img.px) ++hist[v];

    bool constant = false;
    for (int v = 0; v < 256; ++v)
        if (hist[static_cast<std::size_t>(v)] == count) constant = true;
    Image8 out = img;
    if (constant || count == 0) {
        for (auto& v : out.px) v = 0;
        return out;
    }

    std::array<std::uint8_t, 256> lut{};
    std::size_t cdf = 0;
    for (int v = 0; v < 256; ++v) {
        cdf += hist[static_cast<std::size_t>(v)];
        const double mapped = 255.0 * static_cast<double>(cdf) / static_cast<double>(count);
        lut[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(std::llround(mapped));
    }
    for (auto& v : out.px) v = lut[v];
    return out;
}

double Similarity::scale() const { return std::sqrt(a * a + b * b); }

double Similarity::rotation_deg() const { return std::atan2(b, a) * 180.0 / kPi; }

Similarity Similarity::inverse() const {
    const double det = a * a + b * b;
    Similarity inv;
    inv.a = a / det;
    inv.b = -b / det;
    inv.tx = -(inv.a * tx - inv.b * ty);
    inv.ty = -(inv.b * tx + inv.a * ty);
    return inv;
}

Similarity fit_similarity(const std::vector<Point>& src, const std::vector<Point>& dst) {
    if (src.size() != dst.size() || src.size() < 2)
        throw std::invalid_argument("fit_similarity: needs matching point lists of size >= 2");
    const double n = static_cast<double>(src.size());
    Point sc{0, 0}, dc{0, 0};
    for (std::size_t i = 0; i < src.size(); ++i) {
        sc.x += src[i].x;
        sc.y += src[i].y;
        dc.x += dst[i].x;
        dc.y += dst[i].y;
    }
    sc.x /= n;
    sc.y /= n;
    dc.x /= n;
    dc.y /= n;
    // complex least squares: (a+ib) = sum(conj(p) q) / sum(|p|^2) on centered points
    double num_re = 0, num_im = 0, den = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double px = src[i].x - sc.x, py = src[i].y - sc.y;
        const double qx = dst[i].x - dc.x, qy = dst[i].y - dc.y;
        num_re += px * qx + py * qy;
        num_im += px * qy - py * qx;
        den += px * px + py * py;
    }
    if (den <= 0.0) throw std::invalid_argument("fit_similarity: degenerate source points");
    Similarity s;
    s.a = num_re / den;
    s.b = num_im / den;
    s.tx = dc.x - (s.a * sc.x - s.b * sc.y);
    s.ty = dc.y - (s.b * sc.x + s.a * sc.y);
    return s;
}

bool near_collinear(const std::array<Point, 3>& pts, double tol) {
    const double ax = pts[1].x - pts[0].x, ay = pts[1].y - pts[0].y;
    const double bx = pts[2].x - pts[0].x, by = pts[2].y - pts[0].y;
    const double area2 = std::fabs(ax * by - ay * bx);
    double spread = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const double dx = pts[static_cast<std::size_t>(i)].x - pts[static_cast<std::size_t>(j)].x;
            const double dy = pts[static_cast<std::size_t>(i)].y - pts[static_cast<std::size_t>(j)].y;
            spread = std::max(spread, dx * dx + dy * dy);
        }
    return area2 < tol * spread;
}

double sample_bilinear(const ImageF& img, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    auto value = [&img](int xi, int yi) -> double {
        if (xi < 0 || yi < 0 || xi >= img.width || yi >= img.height) return 0.0;
        return img.at(xi, yi);
    };
    const double top = value(x0, y0) * (1 - fx) + value(x0 + 1, y0) * fx;
    const double bot = value(x0, y0 + 1) * (1 - fx) + value(x0 + 1, y0 + 1) * fx;
    return top * (1 - fy) + bot * fy;
}

ImageF warp_similarity(const ImageF& src, const Similarity& fwd, int out_w, int out_h) {
    const Similarity inv = fwd.inverse();
    ImageF out = ImageF::filled(out_w, out_h, 0.0);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            const Point p = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            out.at(x, y) = sample_bilinear(src, p.x, p.y);
        }
    return out;
}

ImageF resize_bilinear(const ImageF& src, int out_w, int out_h) {
    ImageF out = ImageF::filled(out_w, out_h, 0.0);
    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            // align pixel centers
            const double ux = (x + 0.5) * sx - 0.5;
            const double uy = (y + 0.5) * sy - 0.5;
            out.at(x, y) = sample_bilinear(src, ux, uy);
        }
    return out;
}

ImageF rotate_about_center(const ImageF& src, double degrees) {
    const double rad = degrees * kPi / 180.0;
    const double cx = (src.width - 1) / 2.0, cy = (src.height - 1) / 2.0;
    Similarity fwd;
    fwd.a = std::cos(rad);
    fwd.b = std::sin(rad);
    fwd.tx = cx - (fwd.a * cx - fwd.b * cy);
    fwd.ty = cy - (fwd.b * cx + fwd.a * cy);
    return warp_similarity(src, fwd, src.width, src.height);
}

ImageF crop(const ImageF& src, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || x0 + w > src.width || y0 + h > src.height)
        throw std::invalid_argument("crop: window exceeds image bounds");
    ImageF out = ImageF::filled(w, h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = src.at(x0 + x, y0 + y);
    return out;
}

ImageF flip_horizontal(const ImageF& src) {
    ImageF out = src;
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) out.at(x, y) = src.at(src.width - 1 - x, y);
    return out;
}

Tensor image_to_unit_tensor(const ImageF& img) {
    std::vector<double> vals(img.px.size());
    for (std::size_t i = 0; i < img.px.size(); ++i) vals[i] = img.px[i] / 127.5 - 1.0;
    return Tensor::from({1, 1, img.height, img.width}, std::move(vals));
}

ImageF unit_tensor_to_image(const Tensor& t) {
    if (t.rank() < 2) throw std::invalid_argument("unit_tensor_to_image: rank too small");
    const std::int64_t h = t.dim(t.rank() - 2), w = t.dim(t.rank() - 1);
    if (t.size() != h * w)
        throw std::invalid_argument("unit_tensor_to_image: expected a single-channel image, got " +
                                    shape_str(t.shape()));
    ImageF img = ImageF::filled(static_cast<int>(w), static_cast<int>(h), 0.0);
    auto tv = t.values();
    for (std::int64_t i = 0; i < h * w; ++i)
        img.px[static_cast<std::size_t>(i)] = (tv[static_cast<std::size_t>(i)] + 1.0) * 127.5;
    return img;
}

}  // namespace ifgan
