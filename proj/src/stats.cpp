#include "kgrag/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace kgrag {

namespace {

std::int64_t pairs(std::int64_t t) { return t * (t - 1) / 2; }

// Merge sort that counts inversions (strictly decreasing pairs).
std::int64_t sort_count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const auto mid = lo + (hi - lo) / 2;
  std::int64_t swaps = sort_count_inversions(v, buf, lo, mid) + sort_count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

std::int64_t tied_pairs_sorted(const std::vector<double>& sorted) {
  std::int64_t total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      total += pairs(static_cast<std::int64_t>(run));
      run = 1;
    }
  }
  return total;
}

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto next = line.find(sep, pos);
    out.emplace_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  for (auto& s : out) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  }
  return out;
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

int parse_int(const std::string& s, const char* what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("invalid ") + what + ": '" + s + "'");
  }
  return value;
}

}  // namespace

std::optional<double> kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("kendall_tau: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("kendall_tau: need at least two observations");
  const auto n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw std::invalid_argument("kendall_tau: non-finite value");
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });

  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }

  const std::int64_t n0 = pairs(static_cast<std::int64_t>(n));
  const std::int64_t n1 = tied_pairs_sorted(xs);

  // Pairs tied in both coordinates.
  std::int64_t n3 = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && xs[i] == xs[i - 1] && ys[i] == ys[i - 1]) {
      ++run;
    } else {
      n3 += pairs(static_cast<std::int64_t>(run));
      run = 1;
    }
  }

  std::vector<double> buf(n);
  const std::int64_t swaps = sort_count_inversions(ys, buf, 0, n);
  const std::int64_t n2 = tied_pairs_sorted(ys);

  const auto tx = n0 - n1;
  const auto ty = n0 - n2;
  if (tx == 0 || ty == 0) return std::nullopt;
  // Concordant minus discordant pairs.
  const std::int64_t s = n0 - n1 - n2 + n3 - 2 * swaps;
  return static_cast<double>(s) / std::sqrt(static_cast<double>(tx) * static_cast<double>(ty));
}

// ---------------------------------------------------------------------------
// Ratings

std::string_view criterion_name(Criterion c) {
  switch (c) {
    case Criterion::helpfulness_understandability:
      return "helpfulness_understandability";
    case Criterion::structure:
      return "structure";
    case Criterion::length_appropriateness:
      return "length_appropriateness";
  }
  return "structure";
}

Criterion parse_criterion(std::string_view name) {
  for (auto c : {Criterion::helpfulness_understandability, Criterion::structure,
                 Criterion::length_appropriateness}) {
    if (criterion_name(c) == name) return c;
  }
  throw std::invalid_argument("unknown criterion: " + std::string(name));
}

std::string_view rater_role_name(RaterRole r) { return r == RaterRole::worker ? "worker" : "developer"; }

RaterRole parse_rater_role(std::string_view name) {
  if (name == "worker") return RaterRole::worker;
  if (name == "developer") return RaterRole::developer;
  throw std::invalid_argument("unknown rater role: " + std::string(name));
}

std::vector<RatingRecord> parse_ratings_csv(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty()) throw std::invalid_argument("ratings file is empty");
  if (split(lines.front(), ',') != std::vector<std::string>{"participant", "role", "question", "criterion", "score"}) {
    throw std::invalid_argument("ratings header must be participant,role,question,criterion,score");
  }
  std::vector<RatingRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = split(lines[i], ',');
    if (f.size() != 5) throw std::invalid_argument("ratings line " + std::to_string(i + 1) + ": expected 5 fields");
    RatingRecord r{f[0], parse_rater_role(f[1]), parse_int(f[2], "question index"), parse_criterion(f[3]),
                   parse_int(f[4], "score")};
    if (r.participant.empty()) throw std::invalid_argument("ratings line " + std::to_string(i + 1) + ": empty participant");
    if (r.question < 1 || r.question > kStudyQuestions) {
      throw std::invalid_argument("ratings line " + std::to_string(i + 1) + ": question index must be 1..8");
    }
    if (r.score < 1 || r.score > 5) {
      throw std::invalid_argument("ratings line " + std::to_string(i + 1) + ": score must be 1..5");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RatingRecord> load_ratings_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open ratings file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_ratings_csv(buf.str());
}

std::string ratings_to_csv(const std::vector<RatingRecord>& ratings) {
  std::string out = "participant,role,question,criterion,score\n";
  for (const auto& r : ratings) {
    out += r.participant + "," + std::string(rater_role_name(r.role)) + "," + std::to_string(r.question) + "," +
           std::string(criterion_name(r.criterion)) + "," + std::to_string(r.score) + "\n";
  }
  return out;
}

TauMatrix pairwise_tau_matrix(const std::vector<RatingRecord>& ratings, RaterRole role, Criterion criterion) {
  // participant -> question -> score
  std::map<std::string, std::array<std::optional<double>, kStudyQuestions>> by_participant;
  for (const auto& r : ratings) {
    if (r.role != role || r.criterion != criterion) continue;
    by_participant[r.participant][static_cast<std::size_t>(r.question - 1)] = r.score;
  }

  TauMatrix m{};
  for (int i = 0; i < kStudyQuestions; ++i) {
    for (int j = i + 1; j < kStudyQuestions; ++j) {
      std::vector<double> xi, xj;
      for (const auto& [participant, scores] : by_participant) {
        if (scores[i] && scores[j]) {
          xi.push_back(*scores[i]);
          xj.push_back(*scores[j]);
        }
      }
      if (xi.size() < 2) continue;
      const auto tau = kendall_tau(xi, xj);
      m[i][j] = tau;
      m[j][i] = tau;
    }
  }
  return m;
}

std::string render_tau_matrix(const TauMatrix& m, int precision) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(precision);
  out << "question";
  for (int j = 0; j < kStudyQuestions; ++j) out << '\t' << (j + 1);
  out << '\n';
  for (int i = 0; i < kStudyQuestions; ++i) {
    out << (i + 1);
    for (int j = 0; j < kStudyQuestions; ++j) {
      out << '\t';
      if (m[i][j]) {
        out << *m[i][j];
      } else {
        out << "NaN";
      }
    }
    out << '\n';
  }
  return out.str();
}

std::vector<ReferenceMatrix> parse_reference_matrices(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty() || split(lines.front(), ',') != std::vector<std::string>{"role", "criterion", "row", "col", "tau"}) {
    throw std::invalid_argument("reference header must be role,criterion,row,col,tau");
  }
  std::vector<ReferenceMatrix> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = split(lines[i], ',');
    if (f.size() != 5) throw std::invalid_argument("reference line " + std::to_string(i + 1) + ": expected 5 fields");
    const auto role = parse_rater_role(f[0]);
    const auto crit = parse_criterion(f[1]);
    const int row = parse_int(f[2], "row");
    const int col = parse_int(f[3], "col");
    if (row < 1 || row > kStudyQuestions || col < 1 || col > kStudyQuestions) {
      throw std::invalid_argument("reference line " + std::to_string(i + 1) + ": index out of range");
    }
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const ReferenceMatrix& r) { return r.role == role && r.criterion == crit; });
    if (it == out.end()) {
      out.push_back({role, crit, {}});
      it = std::prev(out.end());
    }
    if (f[4] == "nan" || f[4] == "NaN") continue;
    double v = 0;
    auto [ptr, ec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(), v);
    if (ec != std::errc{} || ptr != f[4].data() + f[4].size()) {
      throw std::invalid_argument("reference line " + std::to_string(i + 1) + ": bad value");
    }
    it->matrix[row - 1][col - 1] = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Descriptive statistics

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BoxStats descriptive_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("descriptive_stats needs at least one score");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());

  BoxStats s;
  s.n = v.size();
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.median = quantile_sorted(v, 0.5);
  s.q1 = quantile_sorted(v, 0.25);
  s.q3 = quantile_sorted(v, 0.75);
  s.iqr = s.q3 - s.q1;
  const double low_fence = s.q1 - 1.5 * s.iqr;
  const double high_fence = s.q3 + 1.5 * s.iqr;
  s.whisker_low = s.q1;
  s.whisker_high = s.q3;
  bool have_low = false;
  for (double x : v) {
    if (x < low_fence || x > high_fence) {
      s.outliers.push_back(x);
      continue;
    }
    if (!have_low) {
      s.whisker_low = x;
      have_low = true;
    }
    s.whisker_high = x;
  }
  return s;
}

std::string boxplot_table(const std::vector<RatingRecord>& ratings, RaterRole role, Criterion criterion) {
  std::string out = "question\tn\tmean\tmedian\tq1\tq3\tiqr\twhisker_low\twhisker_high\toutliers\n";
  for (int q = 1; q <= kStudyQuestions; ++q) {
    std::vector<double> scores;
    for (const auto& r : ratings) {
      if (r.role == role && r.criterion == criterion && r.question == q) scores.push_back(r.score);
    }
    if (scores.empty()) continue;
    const auto s = descriptive_stats(scores);
    std::string outliers;
    for (std::size_t i = 0; i < s.outliers.size(); ++i) {
      if (i != 0) outliers += ";";
      outliers += num(s.outliers[i]);
    }
    out += std::to_string(q) + "\t" + std::to_string(s.n) + "\t" + num(s.mean) + "\t" + num(s.median) + "\t" +
           num(s.q1) + "\t" + num(s.q3) + "\t" + num(s.iqr) + "\t" + num(s.whisker_low) + "\t" +
           num(s.whisker_high) + "\t" + outliers + "\n";
  }
  return out;
}

}  // namespace kgrag
