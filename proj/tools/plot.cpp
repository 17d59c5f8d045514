#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace sage::cli {

namespace {

constexpr double kSize = 640.0;
constexpr double kMargin = 40.0;

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Blue (low loss) to red (high loss) by rank, so outliers do not wash out the scale.
std::string ramp(double t) {
  const int r = static_cast<int>(std::lround(40 + 200 * t));
  const int g = static_cast<int>(std::lround(90 - 50 * t));
  const int b = static_cast<int>(std::lround(220 - 180 * t));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string scatter_svg(const ScatterInput& in) {
  const std::size_t n = in.coords.rows();
  const bool two_axes = in.coords.cols() >= 2;
  auto axis = [&](const Coords& c, std::size_t r, std::size_t a) -> double {
    return a < c.cols() ? static_cast<double>(c(r, a)) : 0.0;
  };

  double lo[2] = {0.0, 0.0}, hi[2] = {1.0, 1.0};
  bool any = false;
  auto extend = [&](const Coords& c) {
    for (std::size_t r = 0; r < c.rows(); ++r) {
      for (std::size_t a = 0; a < 2; ++a) {
        const double v = axis(c, r, a);
        if (!any) {
          lo[a] = hi[a] = v;
        } else {
          lo[a] = std::min(lo[a], v);
          hi[a] = std::max(hi[a], v);
        }
      }
      any = true;
    }
  };
  extend(in.coords);
  extend(in.synthetic);
  auto px = [&](double v, std::size_t a) {
    const double span = hi[a] - lo[a] > 0.0 ? hi[a] - lo[a] : 1.0;
    const double t = (v - lo[a]) / span;
    return a == 0 ? kMargin + t * (kSize - 2 * kMargin) : kSize - kMargin - t * (kSize - 2 * kMargin);
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return in.losses[a] < in.losses[b]; });
  std::vector<double> rank_t(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) rank_t[order[i]] = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  out << "<title>" << escape(in.title) << "</title>\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"" << kMargin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << escape(in.title)
      << "</text>\n";
  if (!two_axes) out << "<!-- single-axis projection: y fixed at 0 -->\n";

  out << "<g id=\"dataset\">\n";
  for (std::size_t r = 0; r < n; ++r) {
    const bool hard = r < in.hard.size() && in.hard[r];
    out << "<circle class=\"" << (hard ? "pt hard" : "pt") << "\" cx=\"" << fixed(px(axis(in.coords, r, 0), 0))
        << "\" cy=\"" << fixed(px(axis(in.coords, r, 1), 1)) << "\" r=\"" << (hard ? "3.5" : "2.5")
        << "\" fill=\"" << ramp(rank_t[r]) << '"';
    if (hard) out << " stroke=\"#000000\" stroke-width=\"0.8\"";
    out << "/>\n";
  }
  out << "</g>\n<g id=\"synthetic\">\n";
  for (std::size_t r = 0; r < in.synthetic.rows(); ++r) {
    out << "<rect class=\"syn\" x=\"" << fixed(px(axis(in.synthetic, r, 0), 0) - 1.5) << "\" y=\""
        << fixed(px(axis(in.synthetic, r, 1), 1) - 1.5)
        << "\" width=\"3\" height=\"3\" fill=\"none\" stroke=\"#2a9d4a\" stroke-width=\"0.6\"/>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

}  // namespace sage::cli
