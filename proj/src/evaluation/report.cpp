#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "masked_irl/evaluation.hpp"

namespace masked_irl {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

namespace {

struct MeanSe {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
};

MeanSe across_seeds(const std::vector<double>& values) {
  MeanSe out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) {
    out.se = 0.0;
    return out;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double n = static_cast<double>(values.size());
  out.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

}  // namespace

EvalReport build_report(std::vector<PreferenceMetrics> metrics,
                        const std::function<Density(const PreferenceWeights&)>& classify) {
  EvalReport report;
  std::vector<std::string> methods;
  for (const auto& m : metrics) {
    if (std::find(methods.begin(), methods.end(), m.method) == methods.end()) methods.push_back(m.method);
    if (std::find(report.seeds.begin(), report.seeds.end(), m.seed) == report.seeds.end()) {
      report.seeds.push_back(m.seed);
    }
  }

  for (const auto& method : methods) {
    for (Density stratum : kAllDensities) {
      // seed -> sums over the stratum's preferences
      std::map<std::uint64_t, std::array<double, 4>> per_seed;
      std::set<PreferenceWeights> prefs;
      for (const auto& m : metrics) {
        if (m.method != method || classify(m.preference) != stratum) continue;
        auto& acc = per_seed[m.seed];
        acc[0] += m.win_rate;
        acc[1] += m.reward_variance;
        acc[2] += m.regret;
        acc[3] += 1.0;
        prefs.insert(m.preference);
      }
      std::vector<double> win, var, reg;
      for (const auto& [seed, acc] : per_seed) {
        win.push_back(acc[0] / acc[3]);
        var.push_back(acc[1] / acc[3]);
        reg.push_back(acc[2] / acc[3]);
      }
      StratumRow row;
      row.method = method;
      row.stratum = stratum;
      row.preferences = static_cast<int>(prefs.size());
      row.seeds = static_cast<int>(per_seed.size());
      row.single_seed = per_seed.size() == 1;
      const MeanSe w = across_seeds(win), v = across_seeds(var), r = across_seeds(reg);
      row.win_rate_mean = w.mean;
      row.win_rate_se = w.se;
      row.variance_mean = v.mean;
      row.variance_se = v.se;
      row.regret_mean = r.mean;
      row.regret_se = r.se;
      report.rows.push_back(row);
    }
  }
  report.per_preference = std::move(metrics);
  return report;
}

std::string EvalReport::rows_csv() const {
  std::ostringstream out;
  out << "method,stratum,preferences,seeds,win_rate_mean,win_rate_se,variance_mean,variance_se,regret_mean,"
         "regret_se,single_seed\n";
  for (const auto& r : rows) {
    out << r.method << ',' << to_string(r.stratum) << ',' << r.preferences << ',' << r.seeds << ','
        << format_number(r.win_rate_mean) << ',' << format_number(r.win_rate_se) << ','
        << format_number(r.variance_mean) << ',' << format_number(r.variance_se) << ','
        << format_number(r.regret_mean) << ',' << format_number(r.regret_se) << ',' << (r.single_seed ? 1 : 0)
        << '\n';
  }
  return out.str();
}

std::string EvalReport::per_preference_csv() const {
  std::ostringstream out;
  out << "method,seed,preference,stratum,win_rate,reward_variance,regret\n";
  for (const auto& m : per_preference) {
    out << m.method << ',' << m.seed << ',' << m.preference.to_string() << ','
        << to_string(classify_density(m.preference)) << ',' << format_number(m.win_rate) << ','
        << format_number(m.reward_variance) << ',' << format_number(m.regret) << '\n';
  }
  return out.str();
}

}  // namespace masked_irl
