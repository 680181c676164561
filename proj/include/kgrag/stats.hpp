#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kgrag {

/// Kendall's tau-b (tie corrected), O(n log n).
///
/// Throws std::invalid_argument when the lengths differ or n < 2. Returns
/// std::nullopt when either series is constant (the coefficient is 0/0).
std::optional<double> kendall_tau(std::span<const double> x, std::span<const double> y);

enum class Criterion { helpfulness_understandability, structure, length_appropriateness };
enum class RaterRole { worker, developer };

std::string_view criterion_name(Criterion c);
Criterion parse_criterion(std::string_view name);
std::string_view rater_role_name(RaterRole r);
RaterRole parse_rater_role(std::string_view name);

struct RatingRecord {
  std::string participant;
  RaterRole role = RaterRole::worker;
  int question = 1;  // 1..8
  Criterion criterion = Criterion::helpfulness_understandability;
  int score = 1;     // 1..5

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

inline constexpr int kStudyQuestions = 8;

/// CSV with header `participant,role,question,criterion,score`.
std::vector<RatingRecord> parse_ratings_csv(std::string_view text);
std::vector<RatingRecord> load_ratings_file(const std::string& path);
std::string ratings_to_csv(const std::vector<RatingRecord>& ratings);

/// Cell (i, j) is tau between the participant-aligned score vectors of
/// questions i+1 and j+1. Undefined cells (diagonal, fewer than two shared
/// participants, constant vectors) are std::nullopt.
using TauMatrix = std::array<std::array<std::optional<double>, kStudyQuestions>, kStudyQuestions>;

TauMatrix pairwise_tau_matrix(const std::vector<RatingRecord>& ratings, RaterRole role, Criterion criterion);

/// Tab-separated grid with a header row; undefined cells print as NaN.
std::string render_tau_matrix(const TauMatrix& m, int precision = 4);

/// Published reference matrices (worker/developer x criterion). Only for
/// re-rendering; they are not recomputable from shipped data.
struct ReferenceMatrix {
  RaterRole role;
  Criterion criterion;
  TauMatrix matrix;
};

/// CSV with header `role,criterion,row,col,tau`; `nan` marks undefined.
std::vector<ReferenceMatrix> parse_reference_matrices(std::string_view text);

/// Box-plot summary. Quartiles interpolate linearly between closest ranks
/// (R type 7); whiskers reach the most extreme points within 1.5 IQR of the
/// quartiles; outliers are the points beyond.
struct BoxStats {
  std::size_t n = 0;
  double mean = 0;
  double median = 0;
  double q1 = 0;
  double q3 = 0;
  double iqr = 0;
  double whisker_low = 0;
  double whisker_high = 0;
  std::vector<double> outliers;
};

/// Throws std::invalid_argument on empty input.
BoxStats descriptive_stats(std::span<const double> values);

/// Linear-interpolation quantile (R type 7) of sorted data, p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

/// One box per question of `role`/`criterion`, as a TSV table:
/// question, n, mean, median, q1, q3, iqr, whisker_low, whisker_high, outliers.
std::string boxplot_table(const std::vector<RatingRecord>& ratings, RaterRole role, Criterion criterion);

}  // namespace kgrag
