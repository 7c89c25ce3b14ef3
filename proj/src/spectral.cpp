#include "souplab/spectral.hpp"

#include <Eigen/Dense>

namespace souplab {

namespace {

// Mixture reconstruction objective over a fixed simplex sample:
// mean_{j,i} (w_j' R_i - nubar_j' W x_i)^2.
double mixture_objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& T,
                         const Eigen::MatrixXd& nubars,
                         const Eigen::MatrixXd& W) {
  const Eigen::MatrixXd pred = nubars * W * X.transpose();  // J x n
  return (T - pred).squaredNorm() / (T.rows() * T.cols());
}

// Per-attribute reconstruction objective: sum_k mean_i (R_ik - phi_i' nu_k)^2.
double attribute_objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& R,
                           const Eigen::MatrixXd& W,
                           const Eigen::MatrixXd& nus) {
  const Eigen::MatrixXd pred = X * W.transpose() * nus;  // n x K
  return (R - pred).squaredNorm() / R.rows();
}

}  // namespace

Eigen::MatrixXd raw_feature_matrix(const LanguageMdp& mdp) {
  const FeatureMap raw =
      mdp.features().is_tabular()
          ? mdp.features()
          : FeatureMap::tabular_lgram(mdp.tree(), mdp.features().lgram());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(
      mdp.internal_count() * mdp.vocab_size(), raw.raw_dim());
  long long row = 0;
  for (long long node = 0; node < mdp.internal_count(); ++node) {
    for (int a = 0; a < mdp.vocab_size(); ++a, ++row) {
      X(row, raw.tabular_index(node, a)) = 1.0;
    }
  }
  return X;
}

EmFitResult em_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& R,
                   int d_out, const EmFitConfig& cfg, Rng& rng) {
  const int d_raw = static_cast<int>(X.cols());
  const int n_attrs = static_cast<int>(R.cols());
  if (d_out > d_raw) throw Error("d_out larger than the raw dimension");
  if (cfg.max_iters < 1) throw Error("need at least one iteration");

  Rng local = rng.fork(cfg.seed);

  // Fixed simplex sample so the mixture objective does not drift.
  Eigen::MatrixXd w_samples(cfg.n_w_samples, n_attrs);
  for (int j = 0; j < cfg.n_w_samples; ++j) {
    w_samples.row(j) = local.simplex(n_attrs).transpose();
  }
  const Eigen::MatrixXd T = w_samples * R.transpose();  // J x n

  EmFitResult out;
  out.nus = Eigen::MatrixXd::Zero(d_out, n_attrs);
  for (Eigen::Index i = 0; i < out.nus.size(); ++i) {
    out.nus.data()[i] = local.normal();
  }
  Eigen::MatrixXd W = cfg.init_w.value_or(Eigen::MatrixXd::Zero(d_out, d_raw));
  if (W.rows() != d_out || W.cols() != d_raw) {
    throw Error("init_w shape mismatch");
  }

  const Eigen::MatrixXd XtX = X.transpose() * X;  // d_raw x d_raw

  double previous_mse = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const bool skip_w = iter == 0 && cfg.init_w.has_value();
    if (!skip_w) {
      // Step (i): exact least squares for W given nu. The normal equations
      // factor over the simplex-sample and data Grams:
      //   (sum_j nubar_j nubar_j') W (X'X) = sum_{j,i} t_ji nubar_j x_i'.
      const Eigen::MatrixXd nubars = w_samples * out.nus.transpose();  // J x d_out
      EmHalfStep half;
      half.iteration = iter;
      half.representation_step = true;
      half.before = mixture_objective(X, T, nubars, W);

      const Eigen::MatrixXd gram = nubars.transpose() * nubars;  // d_out x d_out
      const Eigen::MatrixXd rhs = nubars.transpose() * T * X;    // d_out x d_raw
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_g(gram);
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_x(XtX);
      if (cod_g.rank() < d_out || cod_x.rank() < d_raw) {
        out.rank_deficient = true;
      }
      const Eigen::MatrixXd half_solved = cod_g.solve(rhs);  // G^+ rhs
      W = cod_x.solve(half_solved.transpose()).transpose();  // .. (X'X)^+

      half.after = mixture_objective(X, T, nubars, W);
      out.trace.push_back(half);
    }

    // Step (ii): exact least squares for each nu_k given W.
    EmHalfStep half;
    half.iteration = iter;
    half.representation_step = false;
    half.before = attribute_objective(X, R, W, out.nus);
    const Eigen::MatrixXd phi = X * W.transpose();  // n x d_out
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_phi(phi);
    if (cod_phi.rank() < d_out) out.rank_deficient = true;
    for (int k = 0; k < n_attrs; ++k) {
      out.nus.col(k) = cod_phi.solve(R.col(k));
    }
    half.after = attribute_objective(X, R, W, out.nus);
    out.trace.push_back(half);

    out.iterations = iter + 1;
    out.final_mse = half.after / n_attrs;
    if (previous_mse - half.after < cfg.min_improve) break;
    previous_mse = half.after;
  }

  out.psi.linear_map = W;
  return out;
}

}  // namespace souplab
