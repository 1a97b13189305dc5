#include "symbreak/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "symbreak/error.hpp"

namespace symbreak::data {

namespace {

using std::numbers::pi;

Dataset make(int k, int d, int q, Kind kind, int classes = 0) {
  Dataset ds;
  ds.inputs.resize(k, d);
  ds.targets.resize(k, q);
  ds.kind = kind;
  ds.class_count = classes;
  return ds;
}

Dataset scalar_regression(int k, double noise_sd, Rng& rng, double (*f)(double)) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds = make(k, 1, 1, Kind::Regression);
  for (int i = 0; i < k; ++i) {
    const double x = unif(rng);
    ds.inputs(i, 0) = x;
    ds.targets(i, 0) = f(x) + noise_sd * noise(rng);
  }
  return ds;
}

Dataset radial_regression(int k, int dim, double noise_sd, Rng& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds = make(k, dim, 1, Kind::Regression);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < dim; ++j) ds.inputs(i, j) = unif(rng);
    ds.targets(i, 0) = radial_sinc(ds.inputs.row(i).norm()) + noise_sd * noise(rng);
  }
  return ds;
}

Dataset autoencode_from_inputs(Eigen::MatrixXd inputs) {
  Dataset ds;
  ds.kind = Kind::Autoencode;
  ds.targets = inputs;
  ds.inputs = std::move(inputs);
  return ds;
}

Dataset circle(int k, Rng& rng) {
  std::uniform_real_distribution<double> phi(0.0, 2.0 * pi);
  Eigen::MatrixXd x(k, 2);
  for (int i = 0; i < k; ++i) {
    const double a = phi(rng);
    x(i, 0) = std::cos(a);
    x(i, 1) = std::sin(a);
  }
  return autoencode_from_inputs(std::move(x));
}

Dataset spiral(int k, Rng& rng) {
  std::uniform_real_distribution<double> phi(0.0, 6.0 * pi);
  Eigen::MatrixXd x(k, 3);
  for (int i = 0; i < k; ++i) {
    const double a = phi(rng);
    x(i, 0) = std::cos(a);
    x(i, 1) = std::sin(a);
    x(i, 2) = a;
  }
  return autoencode_from_inputs(std::move(x));
}

Dataset sphere(int k, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(k, 3);
  for (int i = 0; i < k; ++i) {
    Eigen::Vector3d v;
    do {
      v = Eigen::Vector3d(g(rng), g(rng), g(rng));
    } while (v.norm() < 1e-12);
    x.row(i) = v.normalized().transpose();
  }
  return autoencode_from_inputs(std::move(x));
}

Dataset two_circles(int k, Rng& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Dataset ds = make(k, 2, 2, Kind::Classification, 2);
  for (int i = 0; i < k; ++i) {
    const double x = unif(rng);
    const double y = unif(rng);
    ds.inputs(i, 0) = x;
    ds.inputs(i, 1) = y;
    ds.targets.row(i) = one_hot(two_circles_class(x, y), 2);
  }
  return ds;
}

// Lang-Witbrock geometry: angle a = t*pi/16 for t in [0, 96] (three turns),
// radius 6.5*(104 - t)/104, second spiral is the point reflection of the
// first. The arc parameter t is drawn uniformly and samples alternate between
// the two spirals. Coordinates are divided by 6.5 to land in [-1, 1]^2.
Dataset two_spirals(int k, Rng& rng) {
  std::uniform_real_distribution<double> arc(0.0, 96.0);
  Dataset ds = make(k, 2, 2, Kind::Classification, 2);
  for (int i = 0; i < k; ++i) {
    const double t = arc(rng);
    const double a = t * pi / 16.0;
    const double r = (104.0 - t) / 104.0;
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    ds.inputs(i, 0) = sign * r * std::sin(a);
    ds.inputs(i, 1) = sign * r * std::cos(a);
    ds.targets.row(i) = one_hot(i % 2, 2);
  }
  return ds;
}

}  // namespace

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset out;
  out.kind = kind;
  out.class_count = class_count;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()), targets.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(rows[i]);
    out.targets.row(static_cast<Eigen::Index>(i)) = targets.row(rows[i]);
  }
  return out;
}

double syn5(double x) {
  const double a = x - 0.5;
  const double b = x + 0.65;
  return a * a * (0.1 + b * b);
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(10.0 * x) / (10.0 * x);
}

double inc_sinc(double x) { return 0.5 * x + sinc(x); }

double radial_sinc(double r) {
  if (r == 0.0) return 5.0 / 15.0;
  return std::sin(5.0 * r) / (15.0 * r);
}

int two_circles_class(double x, double y) {
  const double r2 = kTwoCirclesRadius * kTwoCirclesRadius;
  const double d1 = (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5);
  const double d2 = (x + 0.5) * (x + 0.5) + (y + 0.5) * (y + 0.5);
  return (d1 <= r2 || d2 <= r2) ? 0 : 1;
}

Eigen::RowVectorXd one_hot(int label, int class_count) {
  require(label >= 0 && label < class_count, "one_hot: label out of range");
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(class_count);
  v(label) = 1.0;
  return v;
}

const std::vector<ProblemShape>& generated_problems() {
  static const std::vector<ProblemShape> catalog = {
      {"syn5", Kind::Regression, 1, 1},
      {"sinc", Kind::Regression, 1, 1},
      {"inc-sinc", Kind::Regression, 1, 1},
      {"sinc2d", Kind::Regression, 2, 1},
      {"sinc3d", Kind::Regression, 3, 1},
      {"autoenc-circle", Kind::Autoencode, 2, 2},
      {"autoenc-spiral", Kind::Autoencode, 3, 3},
      {"autoenc-sphere", Kind::Autoencode, 3, 3},
      {"two-circles", Kind::Classification, 2, 2},
      {"two-spirals", Kind::Classification, 2, 2},
  };
  return catalog;
}

Dataset generate(std::string_view problem_id, int sample_count, double noise_sd, Rng& rng) {
  require(sample_count >= 1, "generate: sample_count must be positive");
  require(noise_sd >= 0.0, "generate: noise_sd must be nonnegative");
  if (problem_id == "syn5") return scalar_regression(sample_count, noise_sd, rng, &syn5);
  if (problem_id == "sinc") return scalar_regression(sample_count, noise_sd, rng, &sinc);
  if (problem_id == "inc-sinc") return scalar_regression(sample_count, noise_sd, rng, &inc_sinc);
  if (problem_id == "sinc2d") return radial_regression(sample_count, 2, noise_sd, rng);
  if (problem_id == "sinc3d") return radial_regression(sample_count, 3, noise_sd, rng);
  if (problem_id == "autoenc-circle") return circle(sample_count, rng);
  if (problem_id == "autoenc-spiral") return spiral(sample_count, rng);
  if (problem_id == "autoenc-sphere") return sphere(sample_count, rng);
  if (problem_id == "two-circles") return two_circles(sample_count, rng);
  if (problem_id == "two-spirals") return two_spirals(sample_count, rng);
  throw InputError("unknown problem id '" + std::string(problem_id) + "'");
}

Dataset parse_digits(std::istream& in) {
  constexpr int kFeatures = 16;
  constexpr int kClasses = 10;
  std::vector<std::array<double, kFeatures>> features;
  std::vector<int> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != kFeatures + 1) {
      throw InputError("digits line " + std::to_string(line_no) + ": expected 17 fields, got " +
                       std::to_string(fields.size()));
    }
    std::array<double, kFeatures> row{};
    try {
      for (int j = 0; j < kFeatures; ++j) {
        std::size_t used = 0;
        row[j] = std::stod(fields[j], &used);
        if (fields[j].find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument("");
      }
      std::size_t used = 0;
      const int label = std::stoi(fields[kFeatures], &used);
      if (fields[kFeatures].find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument("");
      if (label < 0 || label >= kClasses) throw std::out_of_range("");
      labels.push_back(label);
    } catch (const std::exception&) {
      throw InputError("digits line " + std::to_string(line_no) + ": malformed field");
    }
    features.push_back(row);
  }
  if (features.empty()) throw InputError("digits file contains no samples");

  Dataset ds = make(static_cast<int>(features.size()), kFeatures, kClasses, Kind::Classification, kClasses);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int j = 0; j < kFeatures; ++j) ds.inputs(r, j) = features[i][j];
    ds.targets.row(r) = one_hot(labels[i], kClasses);
  }
  return ds;
}

SplitDataset load_digits(const std::filesystem::path& path, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open digits file " + path.string());
  const Dataset all = parse_digits(in);
  constexpr int kPerSplit = 1000;
  if (all.size() < 3 * kPerSplit) {
    throw InputError("digits file has " + std::to_string(all.size()) + " samples, need at least 3000");
  }
  return split(all, {kPerSplit, kPerSplit, kPerSplit}, rng);
}

std::pair<Dataset, NormStats> fit_normalize(const Dataset& dataset) {
  require(dataset.size() >= 2, "fit_normalize: need at least two samples");
  NormStats stats;
  auto fit = [&](const Eigen::MatrixXd& m, Eigen::VectorXd& mean, Eigen::VectorXd& scale) {
    mean = m.colwise().mean().transpose();
    scale.resize(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double var = (m.col(j).array() - mean(j)).square().mean();
      if (var > 0.0) {
        scale(j) = std::sqrt(var);
      } else {
        scale(j) = 1.0;
        stats.degenerate = true;
      }
    }
  };
  fit(dataset.inputs, stats.input_mean, stats.input_scale);
  stats.normalize_targets = dataset.kind != Kind::Classification;
  if (stats.normalize_targets) fit(dataset.targets, stats.target_mean, stats.target_scale);
  return {stats.apply(dataset), stats};
}

Dataset NormStats::apply(const Dataset& dataset) const {
  require(dataset.input_dim() == input_mean.size(), "NormStats::apply: input dimension mismatch");
  Dataset out = dataset;
  out.inputs = ((dataset.inputs.rowwise() - input_mean.transpose()).array().rowwise() /
                input_scale.transpose().array())
                   .matrix();
  if (normalize_targets) {
    require(dataset.output_dim() == target_mean.size(), "NormStats::apply: target dimension mismatch");
    out.targets = ((dataset.targets.rowwise() - target_mean.transpose()).array().rowwise() /
                   target_scale.transpose().array())
                      .matrix();
  }
  return out;
}

SplitDataset split(const Dataset& dataset, std::array<int, 3> sizes, Rng& rng) {
  for (int s : sizes) require(s >= 0, "split: negative size");
  const long total = static_cast<long>(sizes[0]) + sizes[1] + sizes[2];
  if (total > dataset.size()) {
    throw InputError("split: requested " + std::to_string(total) + " samples from a set of " +
                     std::to_string(dataset.size()));
  }
  std::vector<int> order(static_cast<std::size_t>(dataset.size()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto take = [&](std::size_t from, int count) {
    return dataset.subset(std::vector<int>(order.begin() + static_cast<long>(from),
                                           order.begin() + static_cast<long>(from) + count));
  };
  SplitDataset out;
  out.train = take(0, sizes[0]);
  out.validation = take(static_cast<std::size_t>(sizes[0]), sizes[1]);
  out.test = take(static_cast<std::size_t>(sizes[0] + sizes[1]), sizes[2]);
  return out;
}

void write_csv(std::ostream& out, const Dataset& dataset) {
  for (int j = 0; j < dataset.input_dim(); ++j) out << (j ? "," : "") << 'x' << (j + 1);
  for (int j = 0; j < dataset.output_dim(); ++j) out << ",y" << (j + 1);
  out << '\n';
  const auto old_precision = out.precision(17);
  for (int i = 0; i < dataset.size(); ++i) {
    for (int j = 0; j < dataset.input_dim(); ++j) out << (j ? "," : "") << dataset.inputs(i, j);
    for (int j = 0; j < dataset.output_dim(); ++j) out << ',' << dataset.targets(i, j);
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace symbreak::data
