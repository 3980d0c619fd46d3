#include "poislearn/systems.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "poislearn/rng.hpp"
#include "poislearn/tensor.hpp"

using namespace poislearn;

namespace {

Vec random_state(const SystemSpec& spec, Rng& rng) {
  Vec x(static_cast<std::size_t>(spec.dim));
  for (int i = 0; i < spec.dim; ++i)
    x[static_cast<std::size_t>(i)] =
        rng.uniform(spec.ic_box[static_cast<std::size_t>(i)][0],
                    spec.ic_box[static_cast<std::size_t>(i)][1]);
  return x;
}

double max_field_dev(const Vec& a, const Vec& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

double dot_vec(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(Systems, RigidBodyFieldExamples) {
  auto spec = SystemSpec::make(SystemName::RB);
  Vec steady = rb_field({1, 0, 0}, spec);
  EXPECT_EQ(steady, (Vec{0, 0, 0}));

  Vec f = rb_field({0, 1, 1}, spec);
  EXPECT_NEAR(f[0], -1.0 / 6.0, 1e-15);
  EXPECT_NEAR(f[1], 0.0, 1e-15);
  EXPECT_NEAR(f[2], 0.0, 1e-15);

  Rng rng(11);
  for (int k = 0; k < 100; ++k) {
    Vec m = random_state(spec, rng);
    Vec fd = rb_field(m, spec);
    EXPECT_LE(std::fabs(dot_vec(fd, m)), 1e-14);
  }
}

TEST(Systems, ParticleFieldExamples) {
  auto spec = SystemSpec::make(SystemName::P2D);
  // Restoring force -(k + c |q|^2) q with k = 1, c = 0.5 at |q| = 1.
  Vec f = particle_field({1, 0, 0, 0}, spec);
  EXPECT_EQ(f, (Vec{0, 0, -1.5, 0}));

  // Angular momentum q x p is conserved: its derivative along the field
  // vanishes identically for a central potential.
  Rng rng(12);
  for (int k = 0; k < 100; ++k) {
    Vec x = random_state(spec, rng);
    Vec fd = particle_field(x, spec);
    // d(qx py - qy px)/dt
    double dL = fd[0] * x[3] + x[0] * fd[3] - fd[1] * x[2] - x[1] * fd[2];
    EXPECT_LE(std::fabs(dL), 1e-14);
  }
}

TEST(Systems, ShivamoggiFieldExamples) {
  Vec f = shivamoggi_field({0.1, 0.2, 0.0, 0.3});
  EXPECT_NEAR(f[0], 0.0, 1e-15);
  EXPECT_NEAR(f[1], 0.0, 1e-15);
  EXPECT_NEAR(f[2], 0.05, 1e-15);
  EXPECT_NEAR(f[3], 0.0, 1e-15);

  Vec g = shivamoggi_field({0.0, 0.7, 0.0, -0.4});
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_NEAR(g[2], -0.4 * 0.7, 1e-15);
  EXPECT_EQ(g[3], 0.0);
}

TEST(Systems, HeavyTopFieldExamples) {
  auto spec = SystemSpec::make(SystemName::HT);
  Vec aligned = heavy_top_field({0, 0, 0, 0, 0, 1}, spec);
  for (double v : aligned) EXPECT_EQ(v, 0.0);

  Vec f = heavy_top_field({0, 0, 0, 1, 0, 0}, spec);
  EXPECT_NEAR(f[0], 0.0, 1e-15);
  EXPECT_NEAR(f[1], -1.0, 1e-15);
  EXPECT_NEAR(f[2], 0.0, 1e-15);
  EXPECT_NEAR(f[3], 0.0, 1e-15);
  EXPECT_NEAR(f[4], 0.0, 1e-15);
  EXPECT_NEAR(f[5], 0.0, 1e-15);
}

TEST(Systems, HeavyTopConservesCasimirDerivatives) {
  auto spec = SystemSpec::make(SystemName::HT);
  auto gt = ground_truth(spec);
  Rng rng(13);
  for (int k = 0; k < 200; ++k) {
    Vec x = random_state(spec, rng);
    Vec f = gt.field(x);
    // d(r.r)/dt = 2 r . rdot
    double dr2 = 2 * (x[3] * f[3] + x[4] * f[4] + x[5] * f[5]);
    // d(M.r)/dt = Mdot . r + M . rdot
    double dmr = f[0] * x[3] + f[1] * x[4] + f[2] * x[5] + x[0] * f[3] + x[1] * f[4] +
                 x[2] * f[5];
    EXPECT_LE(std::fabs(dr2), 1e-13);
    EXPECT_LE(std::fabs(dmr), 1e-13);

    // The reference bivector annihilates both Casimir gradients.
    Tensor L = gt.bivector(x);
    Vec gr2{0, 0, 0, 2 * x[3], 2 * x[4], 2 * x[5]};
    Vec gmr{x[3], x[4], x[5], x[0], x[1], x[2]};
    Tensor a = matvec(L, Tensor::col_vec(gr2));
    Tensor b = matvec(L, Tensor::col_vec(gmr));
    EXPECT_LE(max_abs(a.d), 1e-13);
    EXPECT_LE(max_abs(b.d), 1e-13);
  }
}

TEST(Systems, DissipativeRigidBodyProperties) {
  auto spec = SystemSpec::make(SystemName::RBdis);
  auto gt = ground_truth(spec);
  ASSERT_FALSE(gt.is_hamiltonian);

  SystemSpec frictionless = spec;
  frictionless.tau = 0.0;
  Rng rng(14);
  int strictly_negative = 0;
  for (int k = 0; k < 200; ++k) {
    Vec m = random_state(spec, rng);
    Vec f = rbdis_field(m, spec);

    // |M|^2 stays constant: Mdot . M = 0.
    EXPECT_LE(std::fabs(dot_vec(f, m)), 1e-13);

    // Energy decays: dE/dt = gradE . Mdot <= 0.
    Vec ge = gt.energy_grad(m);
    double de = dot_vec(ge, f);
    EXPECT_LE(de, 1e-15);
    if (de < -1e-12) ++strictly_negative;

    // tau = 0 reduces to the conservative field exactly.
    Vec f0 = rbdis_field(m, frictionless);
    Vec fc = rb_field(m, frictionless);
    EXPECT_EQ(f0, fc);
  }
  EXPECT_GT(strictly_negative, 150);
}

TEST(Systems, HamiltonianFieldMatchesBivectorContraction) {
  for (SystemName name : {SystemName::RB, SystemName::P2D, SystemName::Sh,
                          SystemName::P3D, SystemName::HT}) {
    auto spec = SystemSpec::make(name);
    auto gt = ground_truth(spec);
    ASSERT_TRUE(gt.is_hamiltonian);
    Rng rng(15);
    int checked = 0;
    while (checked < 1000) {
      Vec x = random_state(spec, rng);
      // The Shivamoggi reference bivector has a pole on x + z = 0; stay away
      // from it so the contraction is numerically meaningful.
      if (name == SystemName::Sh && std::fabs(x[1] + x[3]) < 0.05) continue;
      ++checked;
      Vec f = gt.field(x);
      Tensor L = gt.bivector(x);
      Vec g = gt.energy_grad(x);
      Tensor lg = matvec(L, Tensor::col_vec(g));
      EXPECT_LE(max_field_dev(f, lg.d), 1e-12)
          << system_name(name) << " state mismatch at sample " << checked;
    }
  }
}

TEST(Systems, EnergyGradMatchesFiniteDifferences) {
  for (SystemName name : {SystemName::RB, SystemName::P2D, SystemName::Sh,
                          SystemName::P3D, SystemName::HT, SystemName::RBdis}) {
    auto spec = SystemSpec::make(name);
    auto gt = ground_truth(spec);
    Rng rng(16);
    for (int k = 0; k < 50; ++k) {
      Vec x = random_state(spec, rng);
      Vec g = gt.energy_grad(x);
      for (int j = 0; j < spec.dim; ++j) {
        double h = 1e-6;
        Vec xp = x, xm = x;
        xp[static_cast<std::size_t>(j)] += h;
        xm[static_cast<std::size_t>(j)] -= h;
        double fd = (gt.energy(xp) - gt.energy(xm)) / (2 * h);
        EXPECT_NEAR(g[static_cast<std::size_t>(j)], fd, 1e-8) << system_name(name);
      }
    }
  }
}

TEST(Systems, EnergyConstantAlongHamiltonianFields) {
  for (SystemName name : {SystemName::RB, SystemName::P2D, SystemName::Sh,
                          SystemName::P3D, SystemName::HT}) {
    auto spec = SystemSpec::make(name);
    auto gt = ground_truth(spec);
    Rng rng(17);
    for (int k = 0; k < 200; ++k) {
      Vec x = random_state(spec, rng);
      EXPECT_LE(std::fabs(dot_vec(gt.energy_grad(x), gt.field(x))), 1e-13)
          << system_name(name);
    }
  }
}

TEST(Systems, InvariantsConstantAlongField) {
  // Directional derivative of every listed invariant along the field, by
  // central differences (loose tolerance, the FD itself is O(h^2)).
  for (SystemName name : {SystemName::RB, SystemName::P2D, SystemName::Sh,
                          SystemName::P3D, SystemName::HT, SystemName::RBdis}) {
    auto spec = SystemSpec::make(name);
    auto gt = ground_truth(spec);
    Rng rng(18);
    for (int k = 0; k < 20; ++k) {
      Vec x = random_state(spec, rng);
      Vec f = gt.field(x);
      double eps = 1e-6;
      for (const auto& q : gt.invariants) {
        Vec xp = x, xm = x;
        for (std::size_t i = 0; i < x.size(); ++i) {
          xp[i] += eps * f[i];
          xm[i] -= eps * f[i];
        }
        Vec qp = q.value(xp), qm = q.value(xm);
        for (std::size_t i = 0; i < qp.size(); ++i)
          EXPECT_NEAR((qp[i] - qm[i]) / (2 * eps), 0.0, 1e-8)
              << system_name(name) << " invariant " << q.name;
      }
    }
  }
}

TEST(Systems, ShivamoggiPairsAreDegenerate) {
  auto pairs = shivamoggi_poisson_pairs();
  auto spec = SystemSpec::make(SystemName::Sh);
  Rng rng(19);
  for (int k = 0; k < 1000; ++k) {
    Vec x = random_state(spec, rng);
    for (const auto& p : pairs) {
      auto u = p.u(x);
      auto v = p.v(x);
      double d = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
      EXPECT_LE(std::fabs(d), 1e-12);
    }
  }
}

TEST(Systems, ShivamoggiPairwiseCompatibility) {
  auto pairs = shivamoggi_poisson_pairs();
  auto spec = SystemSpec::make(SystemName::Sh);
  Rng rng(20);
  for (int k = 0; k < 1000; ++k) {
    Vec x = random_state(spec, rng);
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        auto ui = pairs[static_cast<std::size_t>(i)].u(x);
        auto vi = pairs[static_cast<std::size_t>(i)].v(x);
        auto uj = pairs[static_cast<std::size_t>(j)].u(x);
        auto vj = pairs[static_cast<std::size_t>(j)].v(x);
        double d = 0;
        for (int c = 0; c < 3; ++c)
          d += ui[static_cast<std::size_t>(c)] * vj[static_cast<std::size_t>(c)] +
               vi[static_cast<std::size_t>(c)] * uj[static_cast<std::size_t>(c)];
        EXPECT_LE(std::fabs(d), 1e-9);
      }
  }
}

TEST(Systems, ShivamoggiPairValuesAtOnes) {
  auto pairs = shivamoggi_poisson_pairs();
  Vec ones{1, 1, 1, 1};
  auto u2 = pairs[1].u(ones);
  EXPECT_EQ(u2[0], 0.0);
  EXPECT_EQ(u2[1], 4.0);
  EXPECT_EQ(u2[2], 0.0);

  auto u1 = pairs[0].u(ones);
  auto v1 = pairs[0].v(ones);
  auto v2 = pairs[1].v(ones);
  double a = u1[0] * v2[0] + u1[1] * v2[1] + u1[2] * v2[2];
  double b = v1[0] * u2[0] + v1[1] * u2[1] + v1[2] * u2[2];
  EXPECT_EQ(a, -16.0);
  EXPECT_EQ(b, 16.0);
}

TEST(Systems, ShivamoggiFieldFromEveryPair) {
  // Each structure reproduces the field with its own Hamiltonian:
  //   field = theta * N^(i) grad(H_i).
  auto pairs = shivamoggi_poisson_pairs();
  auto spec = SystemSpec::make(SystemName::Sh);
  std::array<std::function<Vec(const Vec&)>, 3> grads = {
      [](const Vec& s) { return Vec{0, 2 * s[1], 0, -2 * s[3]}; },
      [](const Vec& s) { return Vec{2 * s[0], 0, -2 * s[2], 2 * s[3]}; },
      [](const Vec& s) { return Vec{s[3] + s[1], s[0], 0, s[0]}; }};
  Rng rng(21);
  int checked = 0;
  while (checked < 500) {
    Vec x = random_state(spec, rng);
    if (std::fabs(x[1] + x[3]) < 0.05) continue;
    ++checked;
    Vec f = shivamoggi_field(x);
    double th = shivamoggi_theta(x);
    for (int i = 0; i < 3; ++i) {
      Tensor N = bivector_from_uv_arrays(pairs[static_cast<std::size_t>(i)].u(x),
                                         pairs[static_cast<std::size_t>(i)].v(x));
      Tensor ng = matvec(N, Tensor::col_vec(grads[static_cast<std::size_t>(i)](x)));
      for (std::size_t c = 0; c < 4; ++c)
        EXPECT_NEAR(th * ng.d[c], f[c], 1e-12) << "pair " << i;
    }
  }
}

TEST(Systems, SamplingIsDeterministicAndInBox) {
  for (SystemName name : {SystemName::RB, SystemName::P2D, SystemName::Sh,
                          SystemName::P3D, SystemName::HT, SystemName::RBdis}) {
    auto spec = SystemSpec::make(name);
    auto a = sample_initial_conditions(spec, 64, 2024);
    auto b = sample_initial_conditions(spec, 64, 2024);
    auto c = sample_initial_conditions(spec, 64, 2025);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (const auto& x : a) {
      ASSERT_EQ(static_cast<int>(x.size()), spec.dim);
      for (int i = 0; i < spec.dim; ++i) {
        EXPECT_GE(x[static_cast<std::size_t>(i)],
                  spec.ic_box[static_cast<std::size_t>(i)][0]);
        EXPECT_LE(x[static_cast<std::size_t>(i)],
                  spec.ic_box[static_cast<std::size_t>(i)][1]);
      }
    }
  }
}

TEST(Systems, HeavyTopSamplesLieOnScaledShell) {
  auto spec = SystemSpec::make(SystemName::HT);
  auto xs = sample_initial_conditions(spec, 200, 7);
  for (const auto& x : xs) {
    double rn = std::sqrt(x[3] * x[3] + x[4] * x[4] + x[5] * x[5]);
    EXPECT_GE(rn, 0.5 - 1e-12);
    EXPECT_LE(rn, 1.0 + 1e-12);
  }
}

TEST(Systems, SpecValidation) {
  auto spec = SystemSpec::make(SystemName::RB);
  spec.inertia[1] = 0.0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);

  auto ht = SystemSpec::make(SystemName::HT);
  ht.chi = {1.0, 1.0, 0.0};
  EXPECT_THROW(ht.validate(), std::invalid_argument);

  auto bad_dim = SystemSpec::make(SystemName::P2D);
  bad_dim.dim = 6;
  EXPECT_THROW(bad_dim.validate(), std::invalid_argument);

  auto neg_tau = SystemSpec::make(SystemName::RBdis);
  neg_tau.tau = -0.5;
  EXPECT_THROW(neg_tau.validate(), std::invalid_argument);

  EXPECT_THROW(sample_initial_conditions(SystemSpec::make(SystemName::RB), 0, 1),
               std::invalid_argument);
  EXPECT_THROW(parse_system("lorenz"), std::invalid_argument);
}

TEST(Systems, NamesRoundTrip) {
  for (SystemName name : {SystemName::RB, SystemName::P2D, SystemName::Sh,
                          SystemName::P3D, SystemName::HT, SystemName::RBdis}) {
    EXPECT_EQ(parse_system(system_name(name)), name);
    EXPECT_EQ(SystemSpec::make(name).dim, system_dim(name));
  }
}
