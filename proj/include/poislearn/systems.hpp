#pragma once
// Ground-truth dynamical systems: vector fields, energies, reference Poisson
// bivectors, conserved quantities, and initial-condition sampling.
//
// State conventions:
//   rb, rbdis  M = (Mx, My, Mz)
//   p2d        (qx, qy, px, py)
//   p3d        (qx, qy, qz, px, py, pz)
//   sh         (u, x, y, z)
//   ht         (Mx, My, Mz, rx, ry, rz)

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "poislearn/rng.hpp"
#include "poislearn/tensor.hpp"

namespace poislearn {

enum class SystemName { RB, P2D, Sh, P3D, HT, RBdis };

inline const char* system_name(SystemName s) {
  switch (s) {
    case SystemName::RB: return "rb";
    case SystemName::P2D: return "p2d";
    case SystemName::Sh: return "sh";
    case SystemName::P3D: return "p3d";
    case SystemName::HT: return "ht";
    case SystemName::RBdis: return "rbdis";
  }
  return "?";
}

inline SystemName parse_system(const std::string& s) {
  if (s == "rb") return SystemName::RB;
  if (s == "p2d") return SystemName::P2D;
  if (s == "sh") return SystemName::Sh;
  if (s == "p3d") return SystemName::P3D;
  if (s == "ht") return SystemName::HT;
  if (s == "rbdis") return SystemName::RBdis;
  throw std::invalid_argument("unknown system '" + s +
                              "' (expected rb, p2d, sh, p3d, ht, or rbdis)");
}

inline int system_dim(SystemName s) {
  switch (s) {
    case SystemName::RB:
    case SystemName::RBdis: return 3;
    case SystemName::P2D:
    case SystemName::Sh: return 4;
    case SystemName::P3D:
    case SystemName::HT: return 6;
  }
  return 0;
}

// Shivamoggi trajectories blow up once coordinates leave this range.
constexpr double kShCoordCap = 10.0;

struct SystemSpec {
  SystemName name = SystemName::RB;
  int dim = 3;
  std::array<double, 3> inertia{1.0, 2.0, 3.0};
  double stiffness = 1.0;                   // k for p2d/p3d
  double quartic = 0.0;                     // quartic well coefficient (p2d)
  double mgl = 1.0;                         // heavy-top gravity torque scale
  std::array<double, 3> chi{0.0, 0.0, 1.0}; // heavy-top center-of-mass direction
  double tau = 0.1;                         // rbdis dissipation time scale
  std::vector<std::array<double, 2>> ic_box;

  static SystemSpec make(SystemName name) {
    SystemSpec s;
    s.name = name;
    s.dim = system_dim(name);
    switch (name) {
      case SystemName::RB:
      case SystemName::RBdis:
        s.ic_box.assign(3, {-1.0, 1.0});
        break;
      case SystemName::P2D:
        s.ic_box.assign(4, {-1.0, 1.0});
        s.quartic = 0.5;
        break;
      case SystemName::P3D:
        s.ic_box.assign(6, {-1.0, 1.0});
        break;
      case SystemName::Sh:
        s.ic_box = {{-0.5, 0.5}, {-0.5, 0.5}, {-0.1, 0.1}, {-0.5, 0.5}};
        break;
      case SystemName::HT:
        // M box; the r part is sampled on a sphere shell instead (see
        // sample_initial_conditions), the box entries are kept for bounds.
        s.ic_box.assign(6, {-1.0, 1.0});
        break;
    }
    return s;
  }

  void validate() const {
    if (dim != system_dim(name)) throw std::invalid_argument("system dim mismatch");
    for (double i : inertia)
      if (i <= 0) throw std::invalid_argument("inertia components must be positive");
    if (tau < 0) throw std::invalid_argument("tau must be non-negative");
    if (static_cast<int>(ic_box.size()) != dim)
      throw std::invalid_argument("ic_box must have one interval per coordinate");
    for (auto& b : ic_box)
      if (!(b[0] <= b[1])) throw std::invalid_argument("empty ic_box interval");
    if (name == SystemName::HT) {
      double n2 = chi[0] * chi[0] + chi[1] * chi[1] + chi[2] * chi[2];
      if (std::fabs(n2 - 1.0) > 1e-9) throw std::invalid_argument("chi must be a unit vector");
    }
  }
};

// Skew matrix of the cross product: hat(a) v = a x v.
inline Tensor hat3(const double* a) {
  Tensor m(3, 3);
  m(0, 1) = -a[2];
  m(0, 2) = a[1];
  m(1, 0) = a[2];
  m(1, 2) = -a[0];
  m(2, 0) = -a[1];
  m(2, 1) = a[0];
  return m;
}

inline std::array<double, 3> cross(const std::array<double, 3>& a,
                                   const std::array<double, 3>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Free rigid body: Mdot = M x (M / I), the Hamiltonian field of
// H = sum M_i^2 / (2 I_i) with bivector hat(M).
inline Vec rb_field(const Vec& m, const SystemSpec& s) {
  std::array<double, 3> M{m[0], m[1], m[2]};
  std::array<double, 3> w{m[0] / s.inertia[0], m[1] / s.inertia[1], m[2] / s.inertia[2]};
  auto f = cross(M, w);
  return {f[0], f[1], f[2]};
}

// Particle in a confining well: qdot = p, pdot = -(k + quartic |q|^2) q
// (canonical bivector). The quartic term couples the coordinate axes; a purely
// harmonic well leaves per-mode rescalings of (L, H) invisible to trajectory
// data, which makes the learned bivector scale arbitrary.
inline Vec particle_field(const Vec& x, const SystemSpec& s) {
  int n = static_cast<int>(x.size()) / 2;
  double q2 = 0;
  for (int i = 0; i < n; ++i) q2 += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
  double k_eff = s.stiffness + s.quartic * q2;
  Vec f(x.size());
  for (int i = 0; i < n; ++i) {
    f[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(n + i)];
    f[static_cast<std::size_t>(n + i)] = -k_eff * x[static_cast<std::size_t>(i)];
  }
  return f;
}

// Magnetohydrodynamic reduction on (u, x, y, z):
//   udot = -uy, xdot = zy, ydot = zx - u^2, zdot = xy.
inline Vec shivamoggi_field(const Vec& s) {
  double u = s[0], x = s[1], y = s[2], z = s[3];
  return {-u * y, z * y, z * x - u * u, x * y};
}

// Heavy top on (M, r):
//   Mdot = M x dH/dM + r x dH/dr,  rdot = r x dH/dM,
//   H = sum M_i^2 / (2 I_i) + mgl r.chi.
inline Vec heavy_top_field(const Vec& x, const SystemSpec& s) {
  std::array<double, 3> M{x[0], x[1], x[2]};
  std::array<double, 3> r{x[3], x[4], x[5]};
  std::array<double, 3> hm{x[0] / s.inertia[0], x[1] / s.inertia[1], x[2] / s.inertia[2]};
  std::array<double, 3> hr{s.mgl * s.chi[0], s.mgl * s.chi[1], s.mgl * s.chi[2]};
  auto mdot_a = cross(M, hm);
  auto mdot_b = cross(r, hr);
  auto rdot = cross(r, hm);
  return {mdot_a[0] + mdot_b[0], mdot_a[1] + mdot_b[1], mdot_a[2] + mdot_b[2],
          rdot[0], rdot[1], rdot[2]};
}

// Energetic Ehrenfest regularization of the rigid body:
//   Mdot = M x dE/dM - (tau/2) Xi dE/dM,  Xi = L^T d2E L, L = hat(M).
// |M|^2 stays exactly conserved while E decays.
inline Vec rbdis_field(const Vec& m, const SystemSpec& s) {
  Vec cons = rb_field(m, s);
  Tensor L = hat3(m.data());
  Tensor ge = Tensor::col_vec(Vec{m[0] / s.inertia[0], m[1] / s.inertia[1], m[2] / s.inertia[2]});
  Tensor lg = matvec(L, ge);
  // Xi ge = L^T d2E (L ge) = -L d2E (L ge).
  Tensor d2e_lg = Tensor::col_vec(
      Vec{lg.d[0] / s.inertia[0], lg.d[1] / s.inertia[1], lg.d[2] / s.inertia[2]});
  Tensor xi_ge = neg(matvec(L, d2e_lg));
  for (int i = 0; i < 3; ++i) cons[static_cast<std::size_t>(i)] -= 0.5 * s.tau * xi_ge.d[static_cast<std::size_t>(i)];
  return cons;
}

// Canonical symplectic bivector [[0, I], [-I, 0]] for even dim.
inline Tensor canonical_bivector(int dim) {
  if (dim % 2 != 0) throw std::invalid_argument("canonical bivector needs even dimension");
  int n = dim / 2;
  Tensor L(dim, dim);
  for (int i = 0; i < n; ++i) {
    L(i, n + i) = 1.0;
    L(n + i, i) = -1.0;
  }
  return L;
}

// One Poisson structure (U, V) of a superintegrable 4D system, as 3-vector
// closures over the state.
struct UVPair {
  std::function<std::array<double, 3>(const Vec&)> u;
  std::function<std::array<double, 3>(const Vec&)> v;
};

// The three Poisson structures of the Shivamoggi system; pair i has
// Hamiltonian H_i and the other two first integrals as Casimirs.
inline std::array<UVPair, 3> shivamoggi_poisson_pairs() {
  UVPair p1{
      [](const Vec& s) -> std::array<double, 3> {
        double u = s[0], y = s[2], z = s[3];
        return {-2 * u * y, 2 * u * z, 2 * u * y};
      },
      [](const Vec& s) -> std::array<double, 3> {
        double u = s[0], x = s[1], y = s[2], z = s[3];
        return {2 * u * u, 2 * y * (x + z), 2 * (u * u - z * (x + z))};
      }};
  UVPair p2{
      [](const Vec& s) -> std::array<double, 3> {
        double u = s[0], x = s[1], z = s[3];
        return {0.0, 2 * (x + z) * u, 0.0};
      },
      [](const Vec& s) -> std::array<double, 3> {
        double x = s[1], z = s[3];
        return {2 * (x + z) * x, 0.0, -2 * (x + z) * z};
      }};
  UVPair p3{
      [](const Vec& s) -> std::array<double, 3> {
        double x = s[1], y = s[2], z = s[3];
        return {-4 * y * z, -4 * z * x, -4 * x * y};
      },
      [](const Vec& s) -> std::array<double, 3> {
        double u = s[0], x = s[1], z = s[3];
        return {-4 * u * x, 0.0, 4 * u * z};
      }};
  return {p1, p2, p3};
}

// Conformal factor relating the Shivamoggi field to its Poisson structures:
// field = theta N^(i) grad H_i.
inline double shivamoggi_theta(const Vec& s) { return -1.0 / (4.0 * (s[1] + s[3])); }

inline Tensor bivector_from_uv_arrays(const std::array<double, 3>& u,
                                      const std::array<double, 3>& v) {
  Tensor L(4, 4);
  L(0, 1) = -u[0];
  L(0, 2) = -u[1];
  L(0, 3) = -u[2];
  L(1, 2) = -v[2];
  L(1, 3) = v[1];
  L(2, 3) = -v[0];
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < i; ++j) L(i, j) = -L(j, i);
  return L;
}

// A conserved scalar diagnostic along the flow (Casimir or first integral).
struct NamedQuantity {
  std::string name;
  std::function<Vec(const Vec&)> value;  // vector-valued; drift uses |q - q0|^2
};

struct GroundTruth {
  SystemSpec spec;
  bool is_hamiltonian = true;
  bool symplectic = false;
  std::function<Vec(const Vec&)> field;
  std::function<double(const Vec&)> energy;
  std::function<Vec(const Vec&)> energy_grad;
  std::function<Tensor(const Vec&)> bivector;  // reference L(x)
  std::vector<NamedQuantity> invariants;       // conserved along the GT flow
};

inline GroundTruth ground_truth(const SystemSpec& spec) {
  spec.validate();
  GroundTruth gt;
  gt.spec = spec;
  SystemSpec s = spec;
  switch (spec.name) {
    case SystemName::RB: {
      gt.field = [s](const Vec& x) { return rb_field(x, s); };
      gt.energy = [s](const Vec& x) {
        return 0.5 * (x[0] * x[0] / s.inertia[0] + x[1] * x[1] / s.inertia[1] +
                      x[2] * x[2] / s.inertia[2]);
      };
      gt.energy_grad = [s](const Vec& x) {
        return Vec{x[0] / s.inertia[0], x[1] / s.inertia[1], x[2] / s.inertia[2]};
      };
      gt.bivector = [](const Vec& x) { return hat3(x.data()); };
      gt.invariants = {{"M2", [](const Vec& x) {
                          return Vec{x[0] * x[0] + x[1] * x[1] + x[2] * x[2]};
                        }}};
      break;
    }
    case SystemName::RBdis: {
      gt.is_hamiltonian = false;
      gt.field = [s](const Vec& x) { return rbdis_field(x, s); };
      gt.energy = [s](const Vec& x) {
        return 0.5 * (x[0] * x[0] / s.inertia[0] + x[1] * x[1] / s.inertia[1] +
                      x[2] * x[2] / s.inertia[2]);
      };
      gt.energy_grad = [s](const Vec& x) {
        return Vec{x[0] / s.inertia[0], x[1] / s.inertia[1], x[2] / s.inertia[2]};
      };
      gt.bivector = [](const Vec& x) { return hat3(x.data()); };
      gt.invariants = {{"M2", [](const Vec& x) {
                          return Vec{x[0] * x[0] + x[1] * x[1] + x[2] * x[2]};
                        }}};
      break;
    }
    case SystemName::P2D:
    case SystemName::P3D: {
      int half = spec.dim / 2;
      gt.symplectic = true;
      gt.field = [s](const Vec& x) { return particle_field(x, s); };
      gt.energy = [s, half](const Vec& x) {
        double e = 0, q2 = 0;
        for (int i = 0; i < half; ++i) {
          e += 0.5 * x[static_cast<std::size_t>(half + i)] * x[static_cast<std::size_t>(half + i)];
          q2 += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        }
        return e + 0.5 * s.stiffness * q2 + 0.25 * s.quartic * q2 * q2;
      };
      gt.energy_grad = [s, half](const Vec& x) {
        double q2 = 0;
        for (int i = 0; i < half; ++i) q2 += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        double k_eff = s.stiffness + s.quartic * q2;
        Vec g(x.size());
        for (int i = 0; i < half; ++i) {
          g[static_cast<std::size_t>(i)] = k_eff * x[static_cast<std::size_t>(i)];
          g[static_cast<std::size_t>(half + i)] = x[static_cast<std::size_t>(half + i)];
        }
        return g;
      };
      int dim = spec.dim;
      gt.bivector = [dim](const Vec&) { return canonical_bivector(dim); };
      if (half == 2) {
        gt.invariants = {{"rxM", [](const Vec& x) {
                            return Vec{x[0] * x[3] - x[1] * x[2]};
                          }}};
      } else {
        gt.invariants = {{"rxM", [](const Vec& x) {
                            return Vec{x[1] * x[5] - x[2] * x[4], x[2] * x[3] - x[0] * x[5],
                                       x[0] * x[4] - x[1] * x[3]};
                          }}};
      }
      break;
    }
    case SystemName::Sh: {
      gt.field = [](const Vec& x) { return shivamoggi_field(x); };
      // Pair 1 is the reference structure: Hamiltonian H1=x^2-z^2 (up to the
      // conformal factor theta), Casimirs H2 and H3.
      gt.energy = [](const Vec& x) { return x[1] * x[1] - x[3] * x[3]; };
      gt.energy_grad = [](const Vec& x) { return Vec{0.0, 2 * x[1], 0.0, -2 * x[3]}; };
      auto pairs = shivamoggi_poisson_pairs();
      UVPair p1 = pairs[0];
      // The bare pair-1 structure reproduces the field only up to the scalar
      // factor below, so fold it in; L(x) then satisfies field = L grad(H).
      gt.bivector = [p1](const Vec& x) {
        Tensor L = bivector_from_uv_arrays(p1.u(x), p1.v(x));
        double th = shivamoggi_theta(x);
        for (double& v : L.d) v *= th;
        return L;
      };
      gt.invariants = {
          {"H1", [](const Vec& x) { return Vec{x[1] * x[1] - x[3] * x[3]}; }},
          {"H2",
           [](const Vec& x) { return Vec{x[3] * x[3] + x[0] * x[0] - x[2] * x[2]}; }},
          {"H3", [](const Vec& x) { return Vec{x[0] * (x[3] + x[1])}; }}};
      break;
    }
    case SystemName::HT: {
      gt.field = [s](const Vec& x) { return heavy_top_field(x, s); };
      gt.energy = [s](const Vec& x) {
        return 0.5 * (x[0] * x[0] / s.inertia[0] + x[1] * x[1] / s.inertia[1] +
                      x[2] * x[2] / s.inertia[2]) +
               s.mgl * (x[3] * s.chi[0] + x[4] * s.chi[1] + x[5] * s.chi[2]);
      };
      gt.energy_grad = [s](const Vec& x) {
        return Vec{x[0] / s.inertia[0], x[1] / s.inertia[1], x[2] / s.inertia[2],
                   s.mgl * s.chi[0], s.mgl * s.chi[1], s.mgl * s.chi[2]};
      };
      gt.bivector = [](const Vec& x) {
        Tensor L(6, 6);
        Tensor hm = hat3(x.data());
        Tensor hr = hat3(x.data() + 3);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            L(i, j) = hm(i, j);
            L(i, 3 + j) = hr(i, j);
            L(3 + i, j) = hr(i, j);
          }
        return L;
      };
      gt.invariants = {
          {"r2",
           [](const Vec& x) { return Vec{x[3] * x[3] + x[4] * x[4] + x[5] * x[5]}; }},
          {"Mr",
           [](const Vec& x) { return Vec{x[0] * x[3] + x[1] * x[4] + x[2] * x[5]}; }}};
      break;
    }
  }
  return gt;
}

inline std::vector<Vec> sample_initial_conditions(const SystemSpec& spec, int count,
                                                  std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  spec.validate();
  Rng rng(seed);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Vec x(static_cast<std::size_t>(spec.dim));
    if (spec.name == SystemName::HT) {
      for (int k = 0; k < 3; ++k)
        x[static_cast<std::size_t>(k)] = rng.uniform(spec.ic_box[static_cast<std::size_t>(k)][0],
                                                     spec.ic_box[static_cast<std::size_t>(k)][1]);
      // r uniform on the unit sphere, scaled into [0.5, 1].
      double nx = 0, ny = 0, nz = 0, n2 = 0;
      do {
        nx = rng.normal();
        ny = rng.normal();
        nz = rng.normal();
        n2 = nx * nx + ny * ny + nz * nz;
      } while (n2 < 1e-12);
      double rho = rng.uniform(0.5, 1.0) / std::sqrt(n2);
      x[3] = nx * rho;
      x[4] = ny * rho;
      x[5] = nz * rho;
    } else {
      for (int k = 0; k < spec.dim; ++k)
        x[static_cast<std::size_t>(k)] = rng.uniform(spec.ic_box[static_cast<std::size_t>(k)][0],
                                                     spec.ic_box[static_cast<std::size_t>(k)][1]);
    }
    out.push_back(std::move(x));
  }
  return out;
}

inline bool sh_in_range(const Vec& x) {
  for (double v : x)
    if (std::fabs(v) > kShCoordCap) return false;
  return true;
}

}  // namespace poislearn
