#pragma once

// Polar Newton-Raphson AC power flow on the standard pi branch model.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "lsdf/case_model.hpp"
#include "lsdf/error.hpp"

namespace lsdf {

using Complex = std::complex<double>;

/// Two-port admittances of one branch: [I_f; I_t] = [yff yft; ytf ytt] [V_f; V_t].
struct BranchAdmittance {
  Complex yff{}, yft{}, ytf{}, ytt{};
};

struct AdmittanceMatrix {
  Eigen::SparseMatrix<Complex> ybus;      // N x N, per unit
  std::vector<BranchAdmittance> branches;  // zero for out-of-service branches
  std::vector<Complex> bus_shunt;          // G + jB per bus, per unit
};

/// Assembles Ybus. Out-of-service branches contribute nothing.
inline AdmittanceMatrix build_admittance(const NetworkCase& nc) {
  const auto n = static_cast<Eigen::Index>(nc.bus_count());
  AdmittanceMatrix out;
  out.branches.resize(nc.branch_count());
  out.bus_shunt.resize(nc.bus_count());

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(4 * nc.branch_count() + nc.bus_count());
  for (std::size_t l = 0; l < nc.branch_count(); ++l) {
    const auto& br = nc.branches()[l];
    if (!br.in_service) continue;
    if (br.x == 0.0) {
      throw CaseError("branch " + std::to_string(l + 1) + " is in service with zero reactance");
    }
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex half_charging(0.0, br.b_charging / 2.0);
    const Complex tap = std::polar(br.tap, br.shift);
    BranchAdmittance ba;
    ba.ytt = ys + half_charging;
    ba.yff = ba.ytt / (br.tap * br.tap);
    ba.yft = -ys / std::conj(tap);
    ba.ytf = -ys / tap;
    out.branches[l] = ba;

    const auto f = static_cast<Eigen::Index>(br.from_bus);
    const auto t = static_cast<Eigen::Index>(br.to_bus);
    trip.emplace_back(f, f, ba.yff);
    trip.emplace_back(f, t, ba.yft);
    trip.emplace_back(t, f, ba.ytf);
    trip.emplace_back(t, t, ba.ytt);
  }
  for (std::size_t i = 0; i < nc.bus_count(); ++i) {
    const auto& b = nc.buses()[i];
    out.bus_shunt[i] = Complex(b.shunt_g, b.shunt_b);
    const auto ii = static_cast<Eigen::Index>(i);
    trip.emplace_back(ii, ii, out.bus_shunt[i]);
  }
  out.ybus.resize(n, n);
  out.ybus.setFromTriplets(trip.begin(), trip.end());
  out.ybus.makeCompressed();
  return out;
}

enum class SolveStatus { converged, max_iterations, singular_jacobian, diverged };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::singular_jacobian: return "singular_jacobian";
    case SolveStatus::diverged: return "diverged";
  }
  return "?";
}

/// Per-bus demand in MW / MVAr.
struct LoadProfile {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

struct SolverOptions {
  double tolerance = 1e-8;  // max |P,Q mismatch|, per unit
  int max_iterations = 20;
  bool flat_start_fallback = true;
};

/// One AC operating point. Powers in MW / MVAr on the case base. Branch flows
/// are measured into the branch at each end, so p_from + p_to is the loss.
struct PowerFlowSolution {
  Eigen::VectorXd v_mag;
  Eigen::VectorXd theta;
  Eigen::VectorXd p_inj;    // generation minus load; slack computed
  Eigen::VectorXd q_inj;
  Eigen::VectorXd p_shunt;  // active power drawn by bus shunts
  Eigen::VectorXd p_from, p_to, q_from, q_to;
  bool converged = false;
  SolveStatus status = SolveStatus::max_iterations;
  int iterations = 0;
  double max_mismatch = 0.0;  // per unit
  bool flat_start = false;    // true if the flat-start retry produced this result
  std::vector<double> mismatch_history;

  /// Net active injection into the branch network (p_inj - p_shunt).
  Eigen::VectorXd network_injection() const { return p_inj - p_shunt; }
  double total_branch_loss() const { return (p_from + p_to).sum(); }
};

struct BranchFlows {
  Eigen::VectorXd p_from, p_to, q_from, q_to;  // MW / MVAr
};

/// Branch end flows implied by a voltage profile.
inline BranchFlows compute_branch_flows(const NetworkCase& nc, const AdmittanceMatrix& y,
                                        const Eigen::VectorXd& v_mag,
                                        const Eigen::VectorXd& theta) {
  const auto nl = static_cast<Eigen::Index>(nc.branch_count());
  BranchFlows out{Eigen::VectorXd::Zero(nl), Eigen::VectorXd::Zero(nl),
                  Eigen::VectorXd::Zero(nl), Eigen::VectorXd::Zero(nl)};
  const double base = nc.base_mva();
  for (Eigen::Index l = 0; l < nl; ++l) {
    const auto& br = nc.branches()[static_cast<std::size_t>(l)];
    if (!br.in_service) continue;
    const auto f = static_cast<Eigen::Index>(br.from_bus);
    const auto t = static_cast<Eigen::Index>(br.to_bus);
    const Complex vf = std::polar(v_mag[f], theta[f]);
    const Complex vt = std::polar(v_mag[t], theta[t]);
    const auto& ba = y.branches[static_cast<std::size_t>(l)];
    const Complex sf = vf * std::conj(ba.yff * vf + ba.yft * vt) * base;
    const Complex st = vt * std::conj(ba.ytf * vf + ba.ytt * vt) * base;
    out.p_from[l] = sf.real();
    out.q_from[l] = sf.imag();
    out.p_to[l] = st.real();
    out.q_to[l] = st.imag();
  }
  return out;
}

/// Complex bus injections V .* conj(Ybus V), per unit.
inline Eigen::VectorXcd bus_injections(const AdmittanceMatrix& y, const Eigen::VectorXd& v_mag,
                                       const Eigen::VectorXd& theta) {
  Eigen::VectorXcd v(v_mag.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::polar(v_mag[i], theta[i]);
  Eigen::VectorXcd current = y.ybus * v;
  return v.cwiseProduct(current.conjugate());
}

/// Newton-Raphson solver bound to one case. The case must outlive the solver.
/// solve() is const and keeps no mutable state, so one solver may serve
/// concurrent callers.
class PowerFlowSolver {
 public:
  explicit PowerFlowSolver(const NetworkCase& nc, SolverOptions opts = {})
      : case_(&nc), opts_(opts), y_(build_admittance(nc)) {
    const auto slack = nc.slack_bus();
    if (!slack) throw CaseError("power flow needs a slack bus");
    slack_ = *slack;

    std::vector<bool> has_gen(nc.bus_count(), false);
    v_set_.assign(nc.bus_count(), 1.0);
    for (const auto& g : nc.generators()) {
      if (!g.in_service || has_gen[g.bus]) continue;
      has_gen[g.bus] = true;
      v_set_[g.bus] = g.v_set;
    }
    if (!has_gen[slack_]) throw CaseError("slack bus has no in-service generator");

    for (std::size_t i = 0; i < nc.bus_count(); ++i) {
      const auto kind = nc.buses()[i].kind;
      if (i == slack_) continue;
      if (kind == BusKind::slack) throw CaseError("power flow supports exactly one slack bus");
      if (kind == BusKind::pv && has_gen[i]) {
        pv_.push_back(i);
      } else {
        pq_.push_back(i);
      }
    }
    pvpq_ = pv_;
    pvpq_.insert(pvpq_.end(), pq_.begin(), pq_.end());
    std::sort(pvpq_.begin(), pvpq_.end());
    std::sort(pq_.begin(), pq_.end());

    const std::size_t none = static_cast<std::size_t>(-1);
    col_angle_.assign(nc.bus_count(), none);
    col_mag_.assign(nc.bus_count(), none);
    std::size_t c = 0;
    for (auto i : pvpq_) col_angle_[i] = c++;
    for (auto i : pq_) col_mag_[i] = c++;
    dim_ = c;
  }

  const NetworkCase& network() const noexcept { return *case_; }
  const AdmittanceMatrix& admittance() const noexcept { return y_; }
  std::size_t slack_bus() const noexcept { return slack_; }
  const SolverOptions& options() const noexcept { return opts_; }

  /// Solves for the given demand and generator active set-points (MW, in
  /// generator order). Starts from the case voltage profile and retries from
  /// a flat start when that fails.
  PowerFlowSolution solve(const LoadProfile& loads, std::span<const double> gen_p) const {
    const auto n = static_cast<Eigen::Index>(case_->bus_count());
    if (loads.p.size() != n || loads.q.size() != n) {
      throw DimensionError("load profile size does not match the bus count");
    }
    if (gen_p.size() != case_->generators().size()) {
      throw DimensionError("generator set-point count does not match the case");
    }
    if (!loads.p.allFinite() || !loads.q.allFinite()) throw NumericalError("loads must be finite");

    const double base = case_->base_mva();
    Eigen::VectorXd p_spec = -loads.p / base;
    Eigen::VectorXd q_spec = -loads.q / base;
    for (std::size_t g = 0; g < gen_p.size(); ++g) {
      const auto& gen = case_->generators()[g];
      if (!gen.in_service) continue;
      p_spec[static_cast<Eigen::Index>(gen.bus)] += gen_p[g] / base;
      q_spec[static_cast<Eigen::Index>(gen.bus)] += gen.q_set / base;
    }

    Eigen::VectorXd vm(n), va(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& b = case_->buses()[static_cast<std::size_t>(i)];
      vm[i] = b.v_init;
      va[i] = b.theta_init;
    }
    apply_voltage_setpoints(vm);
    auto result = newton(p_spec, q_spec, vm, va);
    if (!result.converged && opts_.flat_start_fallback) {
      vm.setOnes();
      va.setZero();
      apply_voltage_setpoints(vm);
      result = newton(p_spec, q_spec, vm, va);
      result.flat_start = true;
    }
    finish(result, p_spec);
    return result;
  }

  /// Solves the case at its nominal (max) loads and set-points.
  PowerFlowSolution solve_nominal() const {
    LoadProfile loads;
    const auto p = case_->p_load_max();
    const auto q = case_->q_load_max();
    loads.p = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
    loads.q = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
    const auto gp = case_->generator_setpoints();
    return solve(loads, gp);
  }

 private:
  void apply_voltage_setpoints(Eigen::VectorXd& vm) const {
    vm[static_cast<Eigen::Index>(slack_)] = v_set_[slack_];
    for (auto i : pv_) vm[static_cast<Eigen::Index>(i)] = v_set_[i];
  }

  double mismatch(const Eigen::VectorXcd& s, const Eigen::VectorXd& p_spec,
                  const Eigen::VectorXd& q_spec, Eigen::VectorXd& f) const {
    f.resize(static_cast<Eigen::Index>(dim_));
    for (auto i : pvpq_) {
      const auto ii = static_cast<Eigen::Index>(i);
      f[static_cast<Eigen::Index>(col_angle_[i])] = s[ii].real() - p_spec[ii];
    }
    for (auto i : pq_) {
      const auto ii = static_cast<Eigen::Index>(i);
      f[static_cast<Eigen::Index>(col_mag_[i])] = s[ii].imag() - q_spec[ii];
    }
    return dim_ == 0 ? 0.0 : f.cwiseAbs().maxCoeff();
  }

  PowerFlowSolution newton(const Eigen::VectorXd& p_spec, const Eigen::VectorXd& q_spec,
                           Eigen::VectorXd vm, Eigen::VectorXd va) const {
    PowerFlowSolution sol;
    const auto n = vm.size();
    const auto dim = static_cast<Eigen::Index>(dim_);
    Eigen::VectorXd f;
    Eigen::SparseMatrix<double> jac(dim, dim);
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    bool pattern_ready = false;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * static_cast<std::size_t>(y_.ybus.nonZeros()) + 4 * static_cast<std::size_t>(n));

    for (int it = 0;; ++it) {
      Eigen::VectorXcd v(n);
      for (Eigen::Index i = 0; i < n; ++i) v[i] = std::polar(vm[i], va[i]);
      Eigen::VectorXcd current = y_.ybus * v;
      Eigen::VectorXcd s = v.cwiseProduct(current.conjugate());
      const double norm = mismatch(s, p_spec, q_spec, f);
      sol.mismatch_history.push_back(norm);
      sol.max_mismatch = norm;
      sol.iterations = it;
      if (!std::isfinite(norm)) {
        sol.status = SolveStatus::diverged;
        break;
      }
      if (norm <= opts_.tolerance) {
        sol.status = SolveStatus::converged;
        sol.converged = true;
        break;
      }
      if (it >= opts_.max_iterations) {
        sol.status = SolveStatus::max_iterations;
        break;
      }

      // dS/dVa = -j diag(V) conj(Y diag(V)) + j diag(V conj(I))
      // dS/dVm = diag(V) conj(Y diag(V/|V|)) + diag(conj(I) V/|V|)
      trip.clear();
      auto add = [&](std::size_t i, std::size_t k, Complex dva, Complex dvm) {
        const std::size_t none = static_cast<std::size_t>(-1);
        const auto rp = col_angle_[i];
        const auto rq = col_mag_[i];
        const auto ca = col_angle_[k];
        const auto cm = col_mag_[k];
        auto put = [&](std::size_t r, std::size_t c, double val) {
          if (r != none && c != none) {
            trip.emplace_back(static_cast<int>(r), static_cast<int>(c), val);
          }
        };
        put(rp, ca, dva.real());
        put(rp, cm, dvm.real());
        put(rq, ca, dva.imag());
        put(rq, cm, dvm.imag());
      };
      for (Eigen::Index k = 0; k < y_.ybus.outerSize(); ++k) {
        const Complex unit_k = v[k] / vm[k];
        for (Eigen::SparseMatrix<Complex>::InnerIterator e(y_.ybus, k); e; ++e) {
          const auto i = e.row();
          const Complex yik = e.value();
          add(static_cast<std::size_t>(i), static_cast<std::size_t>(k),
              Complex(0.0, -1.0) * v[i] * std::conj(yik * v[k]),
              v[i] * std::conj(yik * unit_k));
        }
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        add(static_cast<std::size_t>(i), static_cast<std::size_t>(i),
            Complex(0.0, 1.0) * v[i] * std::conj(current[i]),
            std::conj(current[i]) * v[i] / vm[i]);
      }
      jac.setFromTriplets(trip.begin(), trip.end());
      jac.makeCompressed();
      if (!pattern_ready) {
        lu.analyzePattern(jac);
        pattern_ready = true;
      }
      lu.factorize(jac);
      if (lu.info() != Eigen::Success) {
        sol.status = SolveStatus::singular_jacobian;
        break;
      }
      const Eigen::VectorXd dx = lu.solve(f);
      if (lu.info() != Eigen::Success || !dx.allFinite()) {
        sol.status = SolveStatus::singular_jacobian;
        break;
      }
      for (auto i : pvpq_) va[static_cast<Eigen::Index>(i)] -= dx[static_cast<Eigen::Index>(col_angle_[i])];
      for (auto i : pq_) vm[static_cast<Eigen::Index>(i)] -= dx[static_cast<Eigen::Index>(col_mag_[i])];
      if (!vm.allFinite() || (vm.array() <= 0.0).any() || (vm.array() > 10.0).any()) {
        sol.status = SolveStatus::diverged;
        sol.iterations = it + 1;
        break;
      }
    }
    sol.v_mag = std::move(vm);
    sol.theta = std::move(va);
    return sol;
  }

  void finish(PowerFlowSolution& sol, const Eigen::VectorXd& p_spec) const {
    const auto n = static_cast<Eigen::Index>(case_->bus_count());
    const double base = case_->base_mva();
    if (!sol.converged) {
      // No operating point to report; keep only diagnostics.
      const auto nl = static_cast<Eigen::Index>(case_->branch_count());
      sol.p_inj = sol.q_inj = sol.p_shunt = Eigen::VectorXd::Constant(n, std::nan(""));
      sol.p_from = sol.p_to = sol.q_from = sol.q_to = Eigen::VectorXd::Constant(nl, std::nan(""));
      return;
    }
    const Eigen::VectorXcd s = bus_injections(y_, sol.v_mag, sol.theta);
    sol.p_inj = p_spec * base;
    sol.p_inj[static_cast<Eigen::Index>(slack_)] = s[static_cast<Eigen::Index>(slack_)].real() * base;
    sol.q_inj = s.imag() * base;
    sol.p_shunt.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      sol.p_shunt[i] = y_.bus_shunt[static_cast<std::size_t>(i)].real() * sol.v_mag[i] * sol.v_mag[i] * base;
    }
    auto flows = compute_branch_flows(*case_, y_, sol.v_mag, sol.theta);
    sol.p_from = std::move(flows.p_from);
    sol.p_to = std::move(flows.p_to);
    sol.q_from = std::move(flows.q_from);
    sol.q_to = std::move(flows.q_to);
  }

  const NetworkCase* case_;
  SolverOptions opts_;
  AdmittanceMatrix y_;
  std::size_t slack_ = 0;
  std::vector<std::size_t> pv_, pq_, pvpq_;
  std::vector<std::size_t> col_angle_, col_mag_;
  std::vector<double> v_set_;
  std::size_t dim_ = 0;
};

/// Convenience wrapper: builds a solver and runs one solve.
inline PowerFlowSolution solve_power_flow(const NetworkCase& nc, const LoadProfile& loads,
                                          std::span<const double> gen_p,
                                          SolverOptions opts = {}) {
  return PowerFlowSolver(nc, opts).solve(loads, gen_p);
}

}  // namespace lsdf
