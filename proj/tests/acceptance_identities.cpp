// Acceptance suite, exact/identity criteria. One pass/fail line per
// criterion; exits nonzero if any fails.

#include <cmath>
#include <cstdio>
#include <vector>

#include "fd_check.hpp"
#include "uqsim/decompose.hpp"
#include "uqsim/dgp.hpp"
#include "uqsim/rng.hpp"
#include "uqsim/training.hpp"

using namespace uqsim;

namespace {

int failures = 0;

void report(int criterion, const char* label, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, label,
              detail.c_str());
  if (!pass) ++failures;
}

// Direct mixture-variance evaluation, independent of the decomposition path.
double mixture_variance(const SecondOrderSample& s) {
  const double n = static_cast<double>(s.members.size());
  double m1 = 0.0, m2 = 0.0;
  for (const auto& m : s.members) {
    m1 += m.mean;
    m2 += m.variance + m.mean * m.mean;
  }
  return m2 / n - (m1 / n) * (m1 / n);
}

void criterion_1_variance_identity() {
  RandomStream rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    SecondOrderSample s;
    const int k = 1 + static_cast<int>(rng.below(50));
    for (int i = 0; i < k; ++i) s.members.push_back({3.0 * rng.normal(), 0.01 + 5.0 * rng.uniform01()});
    const UncertaintyEstimate e = variance_decomposition(s);
    const double direct = mixture_variance(s);
    worst = std::max(worst, std::fabs(e.aleatoric + e.epistemic - direct) /
                                std::max(1.0, std::fabs(direct)));
  }
  report(1, "aleatoric + epistemic equals the mixture variance", worst < 1e-12,
         "worst relative gap " + std::to_string(worst));
}

ReferenceGrid random_grid(RandomStream& rng) {
  ReferenceGrid g;
  g.n_d = 2 + static_cast<int>(rng.below(10));
  g.n_gamma = 2 + static_cast<int>(rng.below(10));
  g.query_x = rng.uniform01();
  for (int i = 0; i < g.n_d * g.n_gamma; ++i)
    g.predictions.push_back({4.0 * rng.normal(), 0.05 + rng.uniform01()});
  return g;
}

void criterion_2_total_variance_identity() {
  RandomStream rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const ReferenceGrid g = random_grid(rng);
    const EpistemicBreakdown b = total_variance_split(g);
    worst = std::max(worst,
                     std::fabs(b.procedural + b.data - b.total) / std::max(1.0, b.total));
  }
  report(2, "procedural + data equals the total variance", worst < 1e-9,
         "worst relative gap " + std::to_string(worst));
}

void criterion_3_bias_variance_identity() {
  RandomStream rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const ReferenceGrid g = random_grid(rng);
    const double truth = 4.0 * rng.normal();
    const EpistemicBreakdown b = bias_terms(g, truth);
    double msd = 0.0;
    for (const auto& p : g.predictions) msd += (truth - p.mean) * (truth - p.mean);
    msd /= static_cast<double>(g.predictions.size());
    worst = std::max(worst,
                     std::fabs(msd - (b.total + b.squared_bias)) / std::max(1.0, msd));
  }
  report(3, "mean squared deviation equals total variance plus squared bias", worst < 1e-9,
         "worst relative gap " + std::to_string(worst));
}

void criterion_4_nig_closed_forms() {
  const UncertaintyEstimate e = der_decomposition({0.0, 1.0, 3.0, 2.0});
  bool pass = e.aleatoric == 1.0 && e.epistemic == 1.0;

  RandomStream rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    NigParams p;
    p.gamma = rng.normal();
    p.nu = 0.01 + 10.0 * rng.uniform01();
    p.alpha = 1.01 + 5.0 * rng.uniform01();
    p.beta = 0.01 + 5.0 * rng.uniform01();
    const UncertaintyEstimate d = der_decomposition(p);
    worst = std::max(worst, std::fabs(d.aleatoric / d.epistemic - p.nu) / std::max(1.0, p.nu));
  }
  pass = pass && worst < 1e-12;
  report(4, "NIG closed forms and aleatoric/epistemic = nu", pass,
         "point case exact, worst ratio gap " + std::to_string(worst));
}

void criterion_5_gradient_check() {
  MlpConfig mcfg;  // the paper-scale heteroscedastic MLP
  Mlp model(mcfg);
  RandomStream init(909);
  model.init_params(init);
  const Dataset data = generate_dataset(DgpSpec{}, 32, 42);
  const std::int64_t b = static_cast<std::int64_t>(data.xs.size());

  auto loss_at = [&](const std::vector<double>& flat) {
    ad::Tape tape;
    ad::ParameterVector p = model.params();
    p.assign(flat);
    const auto leaves = p.make_leaves(tape);
    const auto heads = model.forward_tape(
        tape, leaves, tape.constant(ad::Tensor({b, 1}, data.xs)), nullptr);
    return tape.value(gaussian_nll_graph(tape, heads[0], heads[1],
                                         tape.constant(ad::Tensor({b, 1}, data.ys))))[0];
  };

  ad::Tape tape;
  const auto leaves = model.params().make_leaves(tape);
  const auto heads =
      model.forward_tape(tape, leaves, tape.constant(ad::Tensor({b, 1}, data.xs)), nullptr);
  tape.backward(gaussian_nll_graph(tape, heads[0], heads[1],
                                   tape.constant(ad::Tensor({b, 1}, data.ys))));
  const std::vector<double> grad = model.params().gather_grad(tape, leaves);

  const std::vector<double> flat = model.params().values();
  RandomStream pick(555);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t i = static_cast<std::size_t>(pick.below(flat.size()));
    const double fd = testutil::fd_partial(loss_at, flat, i);
    worst = std::max(worst, testutil::rel_err(grad[i], fd));
  }
  report(5, "reverse-mode NLL gradient matches central finite differences", worst < 1e-5,
         "worst relative error " + std::to_string(worst) + " over 50 coordinates");
}

}  // namespace

int main() {
  criterion_1_variance_identity();
  criterion_2_total_variance_identity();
  criterion_3_bias_variance_identity();
  criterion_4_nig_closed_forms();
  criterion_5_gradient_check();
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
