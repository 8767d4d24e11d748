#include "coxkit/mcmc_spatial.hpp"

#include <string>

#include "coxkit/errors.hpp"

namespace coxkit {

void SpatialModel::validate() const {
  if (region.dim() == 0) throw InputError("model region is not set");
  if (data.dim != region.dim()) throw InputError("data dimension differs from the region dimension");
  data.check_inside(region);
  for (const auto& e : data.events) {
    if (e.t != 0) throw InputError("spatial model data must have t = 0 for every event");
  }
  if (hyper.size() != design.n_processes()) throw InputError("one GP prior per design term is required");
  for (std::size_t j = 0; j < hyper.size(); ++j) hyper[j].validate("gp[" + std::to_string(j) + "]");
  lambda.validate();
}

void ChainConfig::validate() const {
  if (thin < 1) throw InputError("mcmc.thin must be >= 1");
  if (burn_in > n_iter) throw InputError("mcmc.burn_in must not exceed mcmc.n_iter");
  if (settings.rejection_cap < 1) throw InputError("mcmc.rejection_cap must be >= 1");
}

std::vector<Site> observed_sites(const PointPattern& data) {
  std::vector<Site> out;
  out.reserve(data.events.size());
  for (const auto& e : data.events) out.push_back(Site{e.t, e.x});
  return out;
}

std::vector<Eigen::VectorXd> observed_covariates(const PointPattern& data) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(data.events.size());
  for (const auto& e : data.events) out.push_back(e.covariates);
  return out;
}

std::vector<double> theta_key(const std::vector<GpHyper>& theta) {
  std::vector<double> key;
  for (const auto& h : theta) key.insert(key.end(), {h.mu, h.sigma2, h.tau2, h.gamma});
  return key;
}

std::vector<IncrementalFactor> ObservedFactorCache::get(const std::vector<const SiteCovariance*>& covs,
                                                        const std::vector<Site>& sites, const Eigen::MatrixXd& values,
                                                        const std::vector<double>& key) {
  if (!valid_ || key != key_ || factors_.size() != covs.size()) {
    factors_.clear();
    for (std::size_t j = 0; j < covs.size(); ++j) {
      factors_.emplace_back(*covs[j], sites, values.col(static_cast<Eigen::Index>(j)));
    }
    key_ = key;
    valid_ = true;
    return factors_;
  }
  for (std::size_t j = 0; j < covs.size(); ++j) {
    factors_[j].set_values(*covs[j], values.col(static_cast<Eigen::Index>(j)));
  }
  return factors_;
}

SpatialState initial_state(const SpatialModel& model) {
  SpatialState s;
  const auto n = static_cast<Eigen::Index>(model.data.size());
  const auto p = static_cast<Eigen::Index>(model.design.n_processes());
  s.k_total = model.data.size();
  s.lambda_star = model.lambda.prior_mean();
  for (const auto& h : model.hyper) s.theta.push_back(h.initial());
  s.beta_n.resize(n, p);
  for (Eigen::Index j = 0; j < p; ++j) s.beta_n.col(j).setConstant(s.theta[static_cast<std::size_t>(j)].mu);
  s.beta_m.resize(0, p);
  return s;
}

namespace {

std::vector<StationaryCovariance> covariances(const std::vector<GpHyper>& theta) {
  std::vector<StationaryCovariance> out;
  for (const auto& h : theta) out.emplace_back(h);
  return out;
}

std::vector<const SiteCovariance*> pointers(const std::vector<StationaryCovariance>& covs) {
  std::vector<const SiteCovariance*> out;
  for (const auto& c : covs) out.push_back(&c);
  return out;
}

std::vector<Site> all_sites(const SpatialState& state, const SpatialModel& model) {
  auto sites = observed_sites(model.data);
  for (const auto& x : state.thinned) sites.push_back(Site{0, x});
  return sites;
}

Eigen::MatrixXd all_values(const SpatialState& state) {
  Eigen::MatrixXd v(state.beta_n.rows() + state.beta_m.rows(), state.beta_n.cols());
  if (state.beta_n.rows() > 0) v.topRows(state.beta_n.rows()) = state.beta_n;
  if (state.beta_m.rows() > 0) v.bottomRows(state.beta_m.rows()) = state.beta_m;
  return v;
}

}  // namespace

void sample_thinned_block(SpatialState& state, const SpatialModel& model, const SamplerSettings& settings, Rng& rng,
                          ObservedFactorCache* cache) {
  const auto n = model.data.size();
  const auto covs = covariances(state.theta);
  const auto ptrs = pointers(covs);
  const auto obs = observed_sites(model.data);
  std::vector<IncrementalFactor> factors;
  if (cache != nullptr) {
    factors = cache->get(ptrs, obs, state.beta_n, theta_key(state.theta));
  } else {
    for (std::size_t j = 0; j < ptrs.size(); ++j) {
      factors.emplace_back(*ptrs[j], obs, state.beta_n.col(static_cast<Eigen::Index>(j)));
    }
  }
  // The current thinned values are part of the field being revealed.
  const auto thin = as_sites(state.thinned);
  for (std::size_t j = 0; j < ptrs.size(); ++j) {
    factors[j].extend_block(*ptrs[j], thin, state.beta_m.col(static_cast<Eigen::Index>(j)));
  }
  auto draw = draw_thinned_events(state.lambda_star, 0, model.region, model.design, ptrs, factors, settings, rng);
  state.k_total = n + draw.locations.size();
  state.thinned = std::move(draw.locations);
  state.beta_m = std::move(draw.values);
}

void sample_gp_block(SpatialState& state, const SpatialModel& model, const SamplerSettings& settings, Rng& rng) {
  const auto covs = covariances(state.theta);
  const auto obs = observed_sites(model.data);
  const auto thin = as_sites(state.thinned);
  const auto sites = all_sites(state, model);
  std::vector<GaussianLaw> laws;
  for (const auto& c : covs) laws.push_back(GaussianLaw{mean_vector(c, sites), cov_matrix(c, sites), c.scale()});
  const Eigen::MatrixXd rows = signed_design(model.design, obs, observed_covariates(model.data), thin);
  const Eigen::MatrixXd beta = draw_gp_slice(laws, rows, all_values(state), settings.sn_sweeps, rng);
  const auto n = static_cast<Eigen::Index>(obs.size());
  state.beta_n = beta.topRows(n);
  state.beta_m = beta.bottomRows(beta.rows() - n);
}

bool sample_theta(SpatialState& state, const SpatialModel& model, const ThetaLayout& layout,
                  AdaptiveMetropolis& adapt, Rng& rng) {
  if (layout.dim() == 0) return false;
  const auto sites = all_sites(state, model);
  const Eigen::MatrixXd values = all_values(state);
  auto target = [&](const Eigen::VectorXd& z) {
    double lp = layout.log_prior(z);
    if (!std::isfinite(lp)) return lp;
    auto theta = state.theta;
    layout.unpack(z, theta);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      lp += gp_log_density(StationaryCovariance(theta[j]), sites, values.col(static_cast<Eigen::Index>(j)));
    }
    return lp;
  };
  Eigen::VectorXd z = layout.pack(state.theta);
  const bool accepted = adapt.step(z, target, rng);
  layout.unpack(z, state.theta);
  return accepted;
}

void sample_lambda_star(SpatialState& state, const SpatialModel& model, Rng& rng) {
  state.lambda_star = model.lambda.draw_posterior(static_cast<double>(state.k_total), model.region.measure(), rng);
}

Eigen::MatrixXd draw_beta_at(const SpatialState& state, const SpatialModel& model, std::span<const Site> sites,
                             Rng& rng) {
  const auto covs = covariances(state.theta);
  const auto known = all_sites(state, model);
  const Eigen::MatrixXd values = all_values(state);
  std::vector<GaussianLaw> laws;
  for (std::size_t j = 0; j < covs.size(); ++j) {
    laws.push_back(conditional_law(covs[j], known, values.col(static_cast<Eigen::Index>(j)), sites));
  }
  return draw_grid_beta(laws, rng);
}

void augment_grid(const SpatialState& state, const SpatialModel& model, IntensityGrid& grid, Rng& rng) {
  if (grid.size() == 0) return;
  const Eigen::MatrixXd beta = draw_beta_at(state, model, grid.sites(), rng);
  grid.add(intensity_from_beta(model.design, grid.sites(), beta, state.lambda_star), beta);
}

ChainOutput run_gibbs(const SpatialModel& model, const ChainConfig& config, SpatialState* final_state) {
  model.validate();
  config.validate();
  Rng rng(config.seed);
  SpatialState state = initial_state(model);
  std::vector<std::string> suffixes;
  for (std::size_t j = 0; j < model.hyper.size(); ++j) suffixes.push_back("_" + std::to_string(j));
  const ThetaLayout layout(model.hyper, suffixes);
  AdaptiveMetropolis adapt(layout.dim());
  ObservedFactorCache cache;

  ChainOutput out;
  out.columns = {"iter", "lambda_star"};
  for (const auto& name : layout.names()) out.columns.push_back(name);
  out.columns.push_back("K");
  out.grid = IntensityGrid(config.grid, model.design.n_processes(), config.keep_grid_trace);

  for (std::size_t it = 0; it < config.n_iter; ++it) {
    try {
      sample_thinned_block(state, model, config.settings, rng, &cache);
      out.thinned_accepted += state.thinned.size();
      sample_gp_block(state, model, config.settings, rng);
      sample_theta(state, model, layout, adapt, rng);
      sample_lambda_star(state, model, rng);
      state.iteration = it + 1;

      std::vector<double> row{static_cast<double>(it + 1), state.lambda_star};
      for (double v : layout.values(state.theta)) row.push_back(v);
      row.push_back(static_cast<double>(state.k_total));
      out.trace.push_back(std::move(row));

      if (config.retained(it)) {
        augment_grid(state, model, out.grid, rng);
        if (config.keep_snapshots) {
          Snapshot snap;
          snap.iteration = it + 1;
          snap.lambda = {state.lambda_star};
          snap.sites = all_sites(state, model);
          snap.values = all_values(state);
          snap.init = state.theta;
          out.snapshots.push_back(std::move(snap));
        }
      }
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it + 1) + ": " + e.what());
    }
  }
  out.theta_acceptance = adapt.acceptance_rate();
  if (final_state != nullptr) *final_state = state;
  return out;
}

}  // namespace coxkit
