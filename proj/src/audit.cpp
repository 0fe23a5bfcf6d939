#include "evf/audit.hpp"

#include <cstdio>

namespace evf {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string scientific(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

}  // namespace

std::string format_shuffle_report(const ShuffleAuditReport& r) {
  std::string out;
  out += "baseline accuracy: " + fixed(r.baseline_accuracy, 4) + "\n";
  for (const auto& [seed, acc] : r.per_seed)
    out += "shuffle seed " + std::to_string(seed) + ": accuracy " + fixed(acc, 4) + "\n";
  out += "accuracy spread: " + fixed(r.accuracy_spread, 4) + "\n";
  out += "max logit residual: " + scientific(r.max_logit_residual) + "\n";
  out += "argmax change fraction: " + fixed(r.argmax_change_fraction, 4) + "\n";
  return out;
}

std::string format_filter_report(const InspectFilterReport& r) {
  std::string out = "block      alpha       beta        alpha*beta  max |AR-RA|\n";
  for (const auto& row : r.rows) {
    char buf[160];
    const std::string block = row.block < 0 ? "shared" : std::to_string(row.block);
    std::snprintf(buf, sizeof(buf), "%-10s %-11.4f %-11.4f %-11.4f %s\n", block.c_str(), row.alpha,
                  row.beta, row.product, scientific(row.commutation_residual).c_str());
    out += buf;
  }
  out += "alpha: " + fixed(r.alpha_mean, 4) + " +/- " + fixed(r.alpha_std, 4) + "\n";
  out += "beta: " + fixed(r.beta_mean, 4) + " +/- " + fixed(r.beta_std, 4) + "\n";
  out += std::string("opposite signs on every block: ") + (r.opposite_sign_all ? "yes" : "no") + "\n";
  return out;
}

std::string format_gradcheck_report(const GradcheckReport& r, double tolerance) {
  std::string out;
  for (const auto& [name, err] : r.per_param) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-24s %s\n", name.c_str(), scientific(err).c_str());
    out += buf;
  }
  out += "max relative error: " + scientific(r.max_rel_error) + " (worst: " + r.worst_param +
         ", tolerance " + scientific(tolerance) + ")\n";
  out += r.max_rel_error < tolerance ? "gradcheck: PASS\n" : "gradcheck: FAIL\n";
  return out;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "configuration                                        reference(%)  accuracy(%)\n";
  for (const auto& row : rows) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%-52s %-13.1f %.1f\n", row.label.c_str(),
                  row.reference_accuracy, 100.0 * row.accuracy);
    out += buf;
  }
  return out;
}

}  // namespace evf
