#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "npcc/errors.hpp"
#include "npcc/metrics.hpp"

namespace npcc {

namespace {

// Uniform-grid accelerator for nearest-neighbor queries on real-valued
// clouds; expanding-shell search identical in spirit to the voxel kNN.
class PointGrid {
 public:
  explicit PointGrid(const PointMatrix& pts) : pts_(pts) {
    const Eigen::Index n = pts.rows();
    for (int a = 0; a < 3; ++a) {
      lo_[a] = pts.col(a).minCoeff();
      hi_[a] = pts.col(a).maxCoeff();
    }
    double volume = 1.0;
    for (int a = 0; a < 3; ++a) volume *= std::max(hi_[a] - lo_[a], 1e-9);
    cell_ = std::max(std::cbrt(volume / std::max<double>(1.0, double(n) / 2.0)), 1e-9);
    for (int a = 0; a < 3; ++a) dims_[a] = cellIndex(hi_[a], a) + 1;
    buckets_.resize(size_t(dims_[0]) * size_t(dims_[1]) * size_t(dims_[2]));
    for (Eigen::Index i = 0; i < n; ++i) buckets_[bucketOf(i)].push_back(int32_t(i));
  }

  /// Indices of the m nearest points to p, ascending by distance (ties by
  /// index), along with squared distances.
  void nearest(const Eigen::RowVector3d& p, int m,
               std::vector<std::pair<double, int32_t>>& out) const {
    int32_t qc[3];
    for (int a = 0; a < 3; ++a) qc[a] = std::clamp(cellIndex(p(a), a), 0, dims_[a] - 1);
    int32_t max_r = 0;
    for (int a = 0; a < 3; ++a) max_r = std::max({max_r, qc[a], dims_[a] - 1 - qc[a]});
    out.clear();
    const auto scan = [&](int32_t x, int32_t y, int32_t z) {
      for (int32_t i : buckets_[index(x, y, z)]) {
        const double d2 = (pts_.row(i) - p).squaredNorm();
        out.emplace_back(d2, i);
      }
    };
    double worst = std::numeric_limits<double>::infinity();
    for (int32_t r = 0; r <= max_r; ++r) {
      if (int(out.size()) >= m) {
        std::nth_element(out.begin(), out.begin() + (m - 1), out.end());
        worst = out[size_t(m - 1)].first;
        out.resize(size_t(m));
        const double gap = double(r - 1) * cell_;
        if (r >= 1 && gap * gap > worst) break;
      }
      const int32_t x0 = std::max(qc[0] - r, 0), x1 = std::min(qc[0] + r, dims_[0] - 1);
      const int32_t y0 = std::max(qc[1] - r, 0), y1 = std::min(qc[1] + r, dims_[1] - 1);
      const int32_t z0 = std::max(qc[2] - r, 0), z1 = std::min(qc[2] + r, dims_[2] - 1);
      if (r == 0) {
        scan(qc[0], qc[1], qc[2]);
        continue;
      }
      for (int sx = -1; sx <= 1; sx += 2) {
        const int32_t x = qc[0] + sx * r;
        if (x < 0 || x >= dims_[0]) continue;
        for (int32_t y = y0; y <= y1; ++y)
          for (int32_t z = z0; z <= z1; ++z) scan(x, y, z);
      }
      const int32_t xi0 = std::max(qc[0] - r + 1, 0), xi1 = std::min(qc[0] + r - 1, dims_[0] - 1);
      for (int sy = -1; sy <= 1; sy += 2) {
        const int32_t y = qc[1] + sy * r;
        if (y < 0 || y >= dims_[1]) continue;
        for (int32_t x = xi0; x <= xi1; ++x)
          for (int32_t z = z0; z <= z1; ++z) scan(x, y, z);
      }
      const int32_t yi0 = std::max(qc[1] - r + 1, 0), yi1 = std::min(qc[1] + r - 1, dims_[1] - 1);
      for (int sz = -1; sz <= 1; sz += 2) {
        const int32_t z = qc[2] + sz * r;
        if (z < 0 || z >= dims_[2]) continue;
        for (int32_t x = xi0; x <= xi1; ++x)
          for (int32_t y = yi0; y <= yi1; ++y) scan(x, y, z);
      }
    }
    const size_t keep = std::min<size_t>(out.size(), size_t(m));
    std::partial_sort(out.begin(), out.begin() + long(keep), out.end());
    out.resize(keep);
  }

 private:
  int32_t cellIndex(double v, int a) const { return int32_t(std::floor((v - lo_[a]) / cell_)); }
  size_t bucketOf(Eigen::Index i) const {
    return index(cellIndex(pts_(i, 0), 0), cellIndex(pts_(i, 1), 1), cellIndex(pts_(i, 2), 2));
  }
  size_t index(int32_t x, int32_t y, int32_t z) const {
    return (size_t(z) * size_t(dims_[1]) + size_t(y)) * size_t(dims_[0]) + size_t(x);
  }

  const PointMatrix& pts_;
  double lo_[3], hi_[3];
  double cell_ = 1;
  int32_t dims_[3];
  std::vector<std::vector<int32_t>> buckets_;
};

double toPsnr(double mse, double peak) {
  if (mse <= 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(3.0 * peak * peak / mse);
}

// PCA normals over normal_k nearest same-cloud neighbors. Rows with a
// degenerate neighborhood get a zero normal, signalling D1 fallback.
PointMatrix pcaNormals(const PointMatrix& cloud, const PointGrid& grid, int normal_k) {
  PointMatrix normals = PointMatrix::Zero(cloud.rows(), 3);
  std::vector<std::pair<double, int32_t>> nn;
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    grid.nearest(cloud.row(i), normal_k, nn);
    if (nn.size() < 3) continue;
    Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
    for (const auto& [d2, j] : nn) mean += cloud.row(j);
    mean /= double(nn.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& [d2, j] : nn) {
      const Eigen::RowVector3d c = cloud.row(j) - mean;
      cov += c.transpose() * c;
    }
    cov /= double(nn.size());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d evs = eig.eigenvalues();  // ascending
    if (evs(1) <= 1e-12 + 1e-9 * evs(2)) continue;  // collinear or flat-degenerate
    normals.row(i) = eig.eigenvectors().col(0).transpose();
  }
  return normals;
}

struct PairedError {
  double d1 = 0;
  double d2 = 0;
};

// Mean squared error from each point of `from` to its nearest point in
// `to`; the plane projection uses the reference-side normal.
PairedError meanSquared(const PointMatrix& from, const PointMatrix& to, const PointGrid& to_grid,
                        const PointMatrix* to_normals, const PointMatrix* from_normals) {
  PairedError err;
  std::vector<std::pair<double, int32_t>> nn;
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    to_grid.nearest(from.row(i), 1, nn);
    const Eigen::RowVector3d disp = to.row(nn[0].second) - from.row(i);
    const double d1 = disp.squaredNorm();
    err.d1 += d1;
    Eigen::RowVector3d n = Eigen::RowVector3d::Zero();
    if (from_normals) n = from_normals->row(i);          // ref -> rec: ref point's normal
    else if (to_normals) n = to_normals->row(nn[0].second);  // rec -> ref: nearest ref normal
    const double dot = disp.dot(n);
    err.d2 += (n.squaredNorm() > 0) ? dot * dot : d1;
  }
  err.d1 /= double(from.rows());
  err.d2 /= double(from.rows());
  return err;
}

}  // namespace

double d1Psnr(const PointMatrix& ref, const PointMatrix& rec, double peak) {
  if (ref.rows() == 0 || rec.rows() == 0) throw EmptyInput();
  const PointGrid ref_grid(ref), rec_grid(rec);
  const PairedError fwd = meanSquared(ref, rec, rec_grid, nullptr, nullptr);
  const PairedError bwd = meanSquared(rec, ref, ref_grid, nullptr, nullptr);
  return toPsnr(std::max(fwd.d1, bwd.d1), peak);
}

double d2Psnr(const PointMatrix& ref, const PointMatrix& rec, double peak, int normal_k) {
  if (ref.rows() == 0 || rec.rows() == 0) throw EmptyInput();
  if (normal_k < 3) throw ShapeError("normal estimation needs at least 3 neighbors");
  const PointGrid ref_grid(ref), rec_grid(rec);
  const PointMatrix normals = pcaNormals(ref, ref_grid, normal_k);
  const PairedError fwd = meanSquared(ref, rec, rec_grid, nullptr, &normals);
  const PairedError bwd = meanSquared(rec, ref, ref_grid, &normals, nullptr);
  return toPsnr(std::max(fwd.d2, bwd.d2), peak);
}

namespace {

void validateCurve(const RdCurve& c, RdChannel channel) {
  if (c.points.size() < 4)
    throw ShapeError("rate-distortion curve needs at least 4 points for the cubic fit");
  for (size_t i = 0; i < c.points.size(); ++i) {
    const double q =
        channel == RdChannel::D1 ? c.points[i].psnr_d1 : c.points[i].psnr_d2;
    if (!std::isfinite(q) || !(c.points[i].bpp > 0))
      throw ShapeError("rate-distortion point is not finite and positive");
    if (i > 0 && !(c.points[i].bpp > c.points[i - 1].bpp))
      throw ShapeError("rate-distortion curve must have strictly increasing bpp");
  }
}

// least-squares cubic of log10(bpp) as a function of quality
Eigen::Vector4d fitLogRate(const RdCurve& c, RdChannel channel, double& qlo, double& qhi) {
  const Eigen::Index n = Eigen::Index(c.points.size());
  Eigen::MatrixXd vand(n, 4);
  Eigen::VectorXd y(n);
  qlo = std::numeric_limits<double>::infinity();
  qhi = -qlo;
  for (Eigen::Index i = 0; i < n; ++i) {
    const RdPoint& p = c.points[size_t(i)];
    const double q = channel == RdChannel::D1 ? p.psnr_d1 : p.psnr_d2;
    vand(i, 0) = 1;
    vand(i, 1) = q;
    vand(i, 2) = q * q;
    vand(i, 3) = q * q * q;
    y(i) = std::log10(p.bpp);
    qlo = std::min(qlo, q);
    qhi = std::max(qhi, q);
  }
  return vand.colPivHouseholderQr().solve(y);
}

double integrate(const Eigen::Vector4d& c, double lo, double hi) {
  const auto antiderivative = [&](double x) {
    return c(0) * x + c(1) * x * x / 2 + c(2) * x * x * x / 3 + c(3) * x * x * x * x / 4;
  };
  return antiderivative(hi) - antiderivative(lo);
}

}  // namespace

double bdRate(const RdCurve& anchor, const RdCurve& test, RdChannel channel) {
  validateCurve(anchor, channel);
  validateCurve(test, channel);
  double alo, ahi, tlo, thi;
  const Eigen::Vector4d ca = fitLogRate(anchor, channel, alo, ahi);
  const Eigen::Vector4d ct = fitLogRate(test, channel, tlo, thi);
  const double lo = std::max(alo, tlo), hi = std::min(ahi, thi);
  if (!(hi > lo)) throw NoOverlap();
  const double delta = (integrate(ct, lo, hi) - integrate(ca, lo, hi)) / (hi - lo);
  return (std::pow(10.0, delta) - 1.0) * 100.0;
}

RdCurve readRdCurveCsv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MalformedFile("cannot open R-D csv: " + path);
  RdCurve curve;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (first && line.find("bpp") != std::string::npos) {
      first = false;
      continue;  // header row
    }
    first = false;
    std::istringstream ss(line);
    RdPoint p;
    char comma;
    if (!(ss >> p.bpp >> comma >> p.psnr_d1 >> comma >> p.psnr_d2))
      throw MalformedFile("bad R-D csv row: " + line);
    curve.points.push_back(p);
  }
  return curve;
}

void writeRdCurveCsv(const std::string& path, const RdCurve& curve) {
  std::ofstream f(path);
  if (!f) throw MalformedFile("cannot open R-D csv for writing: " + path);
  f << "bpp,d1_psnr,d2_psnr\n";
  f.precision(10);
  for (const RdPoint& p : curve.points)
    f << p.bpp << "," << p.psnr_d1 << "," << p.psnr_d2 << "\n";
}

void writeRdSvg(const std::string& path, const std::vector<RdCurve>& curves,
                const std::vector<std::string>& labels, RdChannel channel) {
  const int width = 640, height = 480, margin = 56;
  double blo = 1e300, bhi = -1e300, qlo = 1e300, qhi = -1e300;
  for (const auto& c : curves)
    for (const auto& p : c.points) {
      const double q = channel == RdChannel::D1 ? p.psnr_d1 : p.psnr_d2;
      if (!std::isfinite(q)) continue;
      blo = std::min(blo, p.bpp);
      bhi = std::max(bhi, p.bpp);
      qlo = std::min(qlo, q);
      qhi = std::max(qhi, q);
    }
  if (!(bhi > blo)) { bhi = blo + 1; }
  if (!(qhi > qlo)) { qhi = qlo + 1; }
  const auto px = [&](double bpp) {
    return margin + (bpp - blo) / (bhi - blo) * (width - 2 * margin);
  };
  const auto py = [&](double q) {
    return height - margin - (q - qlo) / (qhi - qlo) * (height - 2 * margin);
  };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ofstream f(path);
  if (!f) throw MalformedFile("cannot open SVG for writing: " + path);
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
    << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  f << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
    << "' y2='" << height - margin << "' stroke='black'/>\n";
  f << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
    << height - margin << "' stroke='black'/>\n";
  f << "<text x='" << width / 2 << "' y='" << height - 12
    << "' text-anchor='middle' font-size='13'>bits per point</text>\n";
  f << "<text x='16' y='" << height / 2 << "' font-size='13' transform='rotate(-90 16 "
    << height / 2 << ")' text-anchor='middle'>"
    << (channel == RdChannel::D1 ? "D1 PSNR (dB)" : "D2 PSNR (dB)") << "</text>\n";
  for (size_t c = 0; c < curves.size(); ++c) {
    f << "<polyline fill='none' stroke='" << palette[c % 5] << "' stroke-width='2' points='";
    for (const auto& p : curves[c].points) {
      const double q = channel == RdChannel::D1 ? p.psnr_d1 : p.psnr_d2;
      if (!std::isfinite(q)) continue;
      f << px(p.bpp) << "," << py(q) << " ";
    }
    f << "'/>\n";
    if (c < labels.size())
      f << "<text x='" << width - margin - 150 << "' y='" << margin + 18 * double(c)
        << "' fill='" << palette[c % 5] << "' font-size='12'>" << labels[c] << "</text>\n";
  }
  f << "</svg>\n";
}

}  // namespace npcc
