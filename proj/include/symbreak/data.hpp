#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace symbreak::data {

using Rng = std::mt19937_64;

enum class Kind { Regression, Autoencode, Classification };

/// Sample matrix pair, one sample per row. Classification targets are one-hot rows.
struct Dataset {
  Eigen::MatrixXd inputs;   // K x d
  Eigen::MatrixXd targets;  // K x q
  Kind kind = Kind::Regression;
  int class_count = 0;

  int size() const { return static_cast<int>(inputs.rows()); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }
  int output_dim() const { return static_cast<int>(targets.cols()); }

  Dataset subset(const std::vector<int>& rows) const;
};

struct SplitDataset {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Per-dimension affine map to zero mean / unit variance, fitted on one set and
/// reusable on held-out sets. Targets are only touched for regression and
/// autoencoding data.
struct NormStats {
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  Eigen::VectorXd target_mean;
  Eigen::VectorXd target_scale;
  bool normalize_targets = false;
  // Set when some dimension had zero variance and was left unscaled.
  bool degenerate = false;

  Dataset apply(const Dataset& dataset) const;
};

struct ProblemShape {
  std::string_view id;
  Kind kind;
  int input_dim;
  int output_dim;
};

/// Catalog of self-generated problems (the digits set is loaded from file).
const std::vector<ProblemShape>& generated_problems();

/// Draws `sample_count` samples of problem `problem_id`. Regression targets get
/// additive N(0, noise_sd^2) noise; autoencoder targets equal the noiseless
/// inputs; class labels are exact.
Dataset generate(std::string_view problem_id, int sample_count, double noise_sd, Rng& rng);

inline constexpr double kDefaultNoiseSd = 5e-3;
inline constexpr double kTwoCirclesRadius = 0.39894;

// Ground-truth functions, exposed for tests.
double syn5(double x);
double sinc(double x);
double inc_sinc(double x);
double radial_sinc(double r);
/// 0 = inside one of the two circles, 1 = outside both.
int two_circles_class(double x, double y);

/// Loads the 16-feature pen digits text format (16 comma separated numbers
/// followed by an integer label 0-9 per line) and draws a random
/// 1000/1000/1000 split.
SplitDataset load_digits(const std::filesystem::path& path, Rng& rng);
Dataset parse_digits(std::istream& in);

std::pair<Dataset, NormStats> fit_normalize(const Dataset& dataset);

/// Disjoint random subsets of the requested sizes (train, validation, test).
SplitDataset split(const Dataset& dataset, std::array<int, 3> sizes, Rng& rng);

/// Delimited text export: header `x1..xd,y1..yq`, one sample per row.
void write_csv(std::ostream& out, const Dataset& dataset);

Eigen::RowVectorXd one_hot(int label, int class_count);

}  // namespace symbreak::data
