#include "mixhmm/inference.hpp"

#include <cmath>
#include <limits>

namespace mixhmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2*pi)

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

double log_sum_exp(const Eigen::Ref<const Vector>& x) {
  const double m = x.maxCoeff();
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

Matrix log_matrix(const Matrix& a) {
  Matrix la(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) la(r, c) = safe_log(a(r, c));
  return la;
}

Vector log_vector(const Vector& p) {
  Vector lp(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) lp[i] = safe_log(p[i]);
  return lp;
}

[[noreturn]] void broken_chain(Eigen::Index t) {
  throw NumericalError("broken chain: no transition mass reaches time step " +
                       std::to_string(t));
}

}  // namespace

double emission_log_density(const Eigen::Ref<const Vector>& y,
                            const Eigen::Ref<const BoolVector>& mask,
                            double dose,
                            const Eigen::Ref<const Vector>& mu,
                            const Eigen::Ref<const Vector>& var,
                            const Eigen::Ref<const Vector>& v,
                            const SequenceOffsets& off) {
  double acc = 0.0;
  for (Eigen::Index d = 0; d < y.size(); ++d) {
    if (!mask[d]) continue;
    if (!std::isfinite(y[d]))
      throw NumericalError("non-finite observation in dimension " +
                           std::to_string(d));
    double mean = mu[d] + v[d] * dose;
    if (off.r_mean.size() > 0) mean += off.r_mean[d];
    if (off.m_mean.size() > 0) mean += off.m_mean[d] * dose;
    const double resid = y[d] - mean;
    acc += -0.5 * (kLogTwoPi + std::log(var[d])) -
           0.5 * resid * resid / var[d];
    if (off.r_var.size() > 0) acc -= 0.5 * off.r_var[d] / var[d];
    if (off.m_var.size() > 0) acc -= 0.5 * dose * dose * off.m_var[d] / var[d];
  }
  return acc;
}

Matrix emission_log_matrix(const Sequence& seq, const HMMParameters& flat,
                           const SequenceOffsets& off) {
  const Eigen::Index t_len = seq.length();
  const Eigen::Index l_len = flat.n_states();
  Matrix logb(t_len, l_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const double dose = seq.inputs[t];
    if (!std::isfinite(dose))
      throw NumericalError("non-finite dose at time step " + std::to_string(t));
    for (Eigen::Index l = 0; l < l_len; ++l)
      logb(t, l) = emission_log_density(
          seq.observations.row(t).transpose(), seq.mask.row(t).transpose(),
          dose, flat.mu.row(l).transpose(), flat.var.row(l).transpose(),
          flat.v.row(l).transpose(), off);
  }
  return logb;
}

Posteriors forward_backward_logb(const Matrix& logb,
                                 const HMMParameters& flat) {
  const Eigen::Index t_len = logb.rows();
  const Eigen::Index l_len = logb.cols();
  const Vector log_pi = log_vector(flat.pi);
  const Matrix log_a = log_matrix(flat.A);

  Matrix la(t_len, l_len);  // log alpha
  la.row(0) = (log_pi + logb.row(0).transpose()).transpose();
  Vector work(l_len);
  for (Eigen::Index t = 1; t < t_len; ++t) {
    for (Eigen::Index l = 0; l < l_len; ++l) {
      work = la.row(t - 1).transpose() + log_a.col(l);
      la(t, l) = log_sum_exp(work) + logb(t, l);
    }
    if (la.row(t).maxCoeff() == kNegInf) broken_chain(t);
  }
  const double loglik = log_sum_exp(la.row(t_len - 1).transpose());
  if (loglik == kNegInf) broken_chain(t_len - 1);

  Matrix lb(t_len, l_len);  // log beta
  lb.row(t_len - 1).setZero();
  for (Eigen::Index t = t_len - 2; t >= 0; --t)
    for (Eigen::Index j = 0; j < l_len; ++j) {
      work = log_a.row(j).transpose() + logb.row(t + 1).transpose() +
             lb.row(t + 1).transpose();
      lb(t, j) = log_sum_exp(work);
    }

  Posteriors post;
  post.loglik = loglik;
  post.gamma.resize(t_len, l_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    work = la.row(t).transpose() + lb.row(t).transpose();
    const double norm = log_sum_exp(work);
    for (Eigen::Index l = 0; l < l_len; ++l)
      post.gamma(t, l) = std::exp(work[l] - norm);
  }
  post.xi.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(t_len - 1, 0)));
  for (Eigen::Index t = 0; t + 1 < t_len; ++t) {
    Matrix slice(l_len, l_len);
    double m = kNegInf;
    for (Eigen::Index j = 0; j < l_len; ++j)
      for (Eigen::Index l = 0; l < l_len; ++l) {
        slice(j, l) = la(t, j) + log_a(j, l) + logb(t + 1, l) + lb(t + 1, l);
        m = std::max(m, slice(j, l));
      }
    double total = 0.0;
    for (Eigen::Index j = 0; j < l_len; ++j)
      for (Eigen::Index l = 0; l < l_len; ++l) {
        // exp(-inf - m) is exactly 0, so structural zeros survive.
        slice(j, l) = slice(j, l) == kNegInf ? 0.0 : std::exp(slice(j, l) - m);
        total += slice(j, l);
      }
    slice /= total;
    post.xi.push_back(std::move(slice));
  }
  return post;
}

DecodedPath viterbi_logb(const Matrix& logb, const HMMParameters& flat) {
  const Eigen::Index t_len = logb.rows();
  const Eigen::Index l_len = logb.cols();
  const Vector log_pi = log_vector(flat.pi);
  const Matrix log_a = log_matrix(flat.A);

  Matrix delta(t_len, l_len);
  Eigen::MatrixXi back(t_len, l_len);
  delta.row(0) = (log_pi + logb.row(0).transpose()).transpose();
  for (Eigen::Index t = 1; t < t_len; ++t) {
    for (Eigen::Index l = 0; l < l_len; ++l) {
      double best = kNegInf;
      int arg = 0;
      for (Eigen::Index j = 0; j < l_len; ++j) {
        const double cand = delta(t - 1, j) + log_a(j, l);
        if (cand > best) {  // strict: ties keep the lower predecessor
          best = cand;
          arg = static_cast<int>(j);
        }
      }
      delta(t, l) = best + logb(t, l);
      back(t, l) = arg;
    }
    if (delta.row(t).maxCoeff() == kNegInf) broken_chain(t);
  }

  DecodedPath path;
  path.states.assign(static_cast<std::size_t>(t_len), 0);
  double best = kNegInf;
  int arg = 0;
  for (Eigen::Index l = 0; l < l_len; ++l)
    if (delta(t_len - 1, l) > best) {
      best = delta(t_len - 1, l);
      arg = static_cast<int>(l);
    }
  if (best == kNegInf) broken_chain(t_len - 1);
  path.map_loglik = best;
  path.states[static_cast<std::size_t>(t_len - 1)] = arg;
  for (Eigen::Index t = t_len - 2; t >= 0; --t)
    path.states[static_cast<std::size_t>(t)] =
        back(t + 1, path.states[static_cast<std::size_t>(t + 1)]);
  return path;
}

double log_likelihood_logb(const Matrix& logb, const HMMParameters& flat) {
  const Eigen::Index t_len = logb.rows();
  const Eigen::Index l_len = logb.cols();
  const Matrix log_a = log_matrix(flat.A);
  Vector la = log_vector(flat.pi) + logb.row(0).transpose();
  Vector next(l_len), work(l_len);
  for (Eigen::Index t = 1; t < t_len; ++t) {
    for (Eigen::Index l = 0; l < l_len; ++l) {
      work = la + log_a.col(l);
      next[l] = log_sum_exp(work) + logb(t, l);
    }
    la.swap(next);
    if (la.maxCoeff() == kNegInf) broken_chain(t);
  }
  const double loglik = log_sum_exp(la);
  if (loglik == kNegInf) broken_chain(t_len - 1);
  return loglik;
}

Posteriors forward_backward(const Sequence& seq, const HMMParameters& flat,
                            const SequenceOffsets& off) {
  return forward_backward_logb(emission_log_matrix(seq, flat, off), flat);
}

DecodedPath viterbi(const Sequence& seq, const HMMParameters& flat,
                    const SequenceOffsets& off) {
  return viterbi_logb(emission_log_matrix(seq, flat, off), flat);
}

double sequence_log_likelihood(const Sequence& seq, const HMMParameters& flat,
                               const SequenceOffsets& off) {
  return log_likelihood_logb(emission_log_matrix(seq, flat, off), flat);
}

}  // namespace mixhmm
