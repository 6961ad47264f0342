#include "uqsim/reference.hpp"

#include <string>

#include "uqsim/errors.hpp"
#include "uqsim/threading.hpp"

namespace uqsim {

void ReferenceConfig::validate() const {
  if (n_d < 2 || n_gamma < 2)
    throw ContractViolation("ReferenceConfig: need n_d >= 2 and n_gamma >= 2");
  if (static_cast<int>(dataset_seeds.size()) < n_d)
    throw ContractViolation("ReferenceConfig: fewer dataset seeds than n_d");
  mlp.validate();
  train.validate();
}

ReferenceResult estimate_reference(const DgpSpec& spec, int n, const ReferenceConfig& cfg,
                                   std::span<const double> query_xs) {
  cfg.validate();
  if (query_xs.empty()) throw ContractViolation("estimate_reference: empty query grid");

  const int n_d = cfg.n_d;
  const int n_gamma = cfg.n_gamma;
  const std::size_t cells = static_cast<std::size_t>(n_d) * static_cast<std::size_t>(n_gamma);

  std::vector<Dataset> datasets;
  datasets.reserve(static_cast<std::size_t>(n_d));
  for (int d = 0; d < n_d; ++d)
    datasets.push_back(generate_dataset(spec, n, cfg.dataset_seeds[static_cast<std::size_t>(d)]));

  std::vector<std::uint64_t> proc_seeds(static_cast<std::size_t>(n_gamma));
  for (int g = 0; g < n_gamma; ++g)
    proc_seeds[static_cast<std::size_t>(g)] =
        RandomStream::derive_seed(cfg.proc_master_seed, "reference-proc", static_cast<std::uint64_t>(g));

  // cell_preds[cell] holds the predictions over the query grid, or stays
  // empty when that training failed.
  std::vector<std::vector<FirstOrderPrediction>> cell_preds(cells);
  std::vector<std::string> cell_errors(cells);

  parallel_for(cells, cfg.parallelism, [&](std::size_t cell) {
    const int d = static_cast<int>(cell) / n_gamma;
    const int g = static_cast<int>(cell) % n_gamma;
    TrainConfig tcfg = cfg.train;
    tcfg.seed = proc_seeds[static_cast<std::size_t>(g)];
    try {
      const TrainedMlp trained = train_mlp(datasets[static_cast<std::size_t>(d)], cfg.mlp, tcfg);
      cell_preds[cell] = het_predict(trained.model, query_xs);
    } catch (const std::exception& e) {
      cell_errors[cell] = e.what();
    }
  });

  ReferenceResult result;
  result.query_xs.assign(query_xs.begin(), query_xs.end());

  std::vector<int> complete_rows;
  std::size_t ok_cells = 0;
  for (int d = 0; d < n_d; ++d) {
    bool row_ok = true;
    for (int g = 0; g < n_gamma; ++g) {
      const std::size_t cell = static_cast<std::size_t>(d * n_gamma + g);
      if (cell_preds[cell].empty()) {
        row_ok = false;
        result.failed_cells.emplace_back(d, g);
        result.cell_errors.push_back("cell (" + std::to_string(d) + "," + std::to_string(g) +
                                     "): " + cell_errors[cell]);
      } else {
        ++ok_cells;
      }
    }
    if (row_ok) complete_rows.push_back(d);
  }

  if (static_cast<double>(ok_cells) < 0.9 * static_cast<double>(cells))
    throw MethodError("reference", "more than 10% of grid cells failed to train");
  if (complete_rows.size() < 2)
    throw MethodError("reference", "fewer than two complete dataset rows");

  const int rows = static_cast<int>(complete_rows.size());
  result.grids.reserve(query_xs.size());
  result.breakdowns.reserve(query_xs.size());
  result.estimates.reserve(query_xs.size());
  for (std::size_t q = 0; q < query_xs.size(); ++q) {
    ReferenceGrid grid;
    grid.query_x = query_xs[q];
    grid.n_d = rows;
    grid.n_gamma = n_gamma;
    grid.predictions.reserve(static_cast<std::size_t>(rows * n_gamma));
    for (int r = 0; r < rows; ++r) {
      const int d = complete_rows[static_cast<std::size_t>(r)];
      for (int g = 0; g < n_gamma; ++g)
        grid.predictions.push_back(cell_preds[static_cast<std::size_t>(d * n_gamma + g)][q]);
    }
    result.breakdowns.push_back(analyze_grid(grid, f_true(grid.query_x)));
    result.estimates.push_back(variance_decomposition(flatten_grid(grid)));
    result.grids.push_back(std::move(grid));
  }
  return result;
}

}  // namespace uqsim
