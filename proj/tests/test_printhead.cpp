#include <doctest.h>

#include <complex>
#include <random>

#include "fixtures.hpp"
#include "pwainv/error.hpp"
#include "pwainv/printhead.hpp"

using namespace pwainv;
using fixtures::v;

namespace {

using Cplx = std::complex<double>;

Cplx on_circle(double hz, double Ts) { return std::polar(1.0, 2 * M_PI * hz * Ts); }

// b z (z + 1) / (z^2 + a1 z + a2)
Cplx lowpass(const FeedbackParams& p, Cplx z) { return p.b * z * (z + 1.0) / (z * z + p.a1 * z + p.a2); }

double db(double x) { return 20 * std::log10(x); }

// Benchmark results are shared by the cases below; computed once.
const BenchResults& default_results() {
  static const BenchResults r = run_benchmark(default_bench_config());
  return r;
}

}  // namespace

TEST_SUITE("printhead") {
  TEST_CASE("pure delay realization") {
    ZpkModel z;
    z.poles = {0.0};
    const StateSpace ss = zpk_to_state_space(z);
    Vec x = Vec::Zero(1);
    std::vector<double> step;
    for (int k = 0; k < 4; ++k) {
      step.push_back(ss.C.dot(x) + ss.D);
      x = ss.A * x + ss.B;
    }
    CHECK(step == std::vector<double>{0, 1, 1, 1});
  }

  TEST_CASE("realizations reproduce the transfer functions") {
    const BenchConfig cfg = default_bench_config();
    for (const ZpkModel& z : {cfg.truth.plant, cfg.control.plant}) {
      const StateSpace ss = zpk_to_state_space(z);
      CHECK(ss.A.rows() == static_cast<long>(z.poles.size()));
      for (double w : {0.01, 0.3, 1.0, 2.5})
        for (double radius : {1.0, 1.7}) {
          const Cplx p = std::polar(radius, w);
          const Cplx ref = frequency_response(z, p);
          CHECK(std::abs(frequency_response(ss, p) - ref) <= 1e-9 * std::abs(ref));
        }
    }
    // Biproper case moves the direct term into D.
    ZpkModel bi;
    bi.zeros = {0.5, -0.2};
    bi.poles = {Cplx(0.3, 0.4), Cplx(0.3, -0.4)};
    bi.gain = 2.0;
    const StateSpace ss = zpk_to_state_space(bi);
    CHECK(ss.D == 2.0);
    const Cplx p = std::polar(1.0, 0.7);
    CHECK(std::abs(frequency_response(ss, p) - frequency_response(bi, p)) < 1e-12);
  }

  TEST_CASE("invalid zero-pole sets are rejected") {
    ZpkModel z;
    z.poles = {Cplx(0.5, 0.5)};
    CHECK_THROWS_AS(zpk_to_state_space(z), Error);
    ZpkModel improper;
    improper.zeros = {0.1, 0.2};
    improper.poles = {0.3};
    CHECK_THROWS_AS(zpk_to_state_space(improper), Error);
  }

  TEST_CASE("non-minimum-phase zero counts") {
    const BenchConfig cfg = default_bench_config();
    CHECK(nmp_zero_count(cfg.truth.plant) == 1);
    CHECK(nmp_zero_count(cfg.control.plant) == 2);
  }

  TEST_CASE("truth plant integrates twice") {
    const ZpkModel& z = default_bench_config().truth.plant;
    // Double pole at 1: halving a low frequency quadruples the magnitude.
    const double ratio = std::abs(frequency_response(z, on_circle(0.05, z.Ts))) /
                         std::abs(frequency_response(z, on_circle(0.1, z.Ts)));
    CHECK(ratio == doctest::Approx(4.0).epsilon(1e-3));
  }

  TEST_CASE("lowpass filters roll off near 40 Hz") {
    const BenchConfig cfg = default_bench_config();
    for (const FeedbackParams& p : {cfg.truth.feedback, cfg.control.feedback}) {
      const double rel = db(std::abs(lowpass(p, on_circle(40, p.Ts)))) - db(std::abs(lowpass(p, 1.0)));
      CHECK(rel <= -2.0);
      CHECK(rel >= -4.0);
    }
  }

  TEST_CASE("proportional gain switches on the stored error") {
    const FeedbackParams p = default_bench_config().control.feedback;
    const SwitchingController c = build_feedback_controller(p);
    CHECK(c.proportional_gain(0.0, p) == 40.0);
    CHECK(c.proportional_gain(0.003, p) == 160.0);
    CHECK(c.proportional_gain(-0.003, p) == 160.0);
    CHECK(c.proportional_gain(0.002, p) == 40.0);
    CHECK(c.proportional_gain(-0.002, p) == 40.0);
    FeedbackParams bad = p;
    bad.e_switch = 0.0;
    CHECK_THROWS_AS(build_feedback_controller(bad), Error);
  }

  TEST_CASE("controller output realizes the lowpass-filtered PD law") {
    // Oracle under the low gain: pd_k = Kp e_k + Kd (e_k - e_{k-1}) / Ts filtered by
    // o_k = b (pd_k + pd_{k-1}) - a1 o_{k-1} - a2 o_{k-2}.
    const FeedbackParams p = default_bench_config().control.feedback;
    const SwitchingController c = build_feedback_controller(p);
    std::mt19937_64 rng(51);
    Vec xc = Vec::Zero(3);
    double e1 = 0.0, e2 = 0.0, o1 = 0.0, o2 = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double e = fixtures::uniform(rng, -0.0015, 0.0015);
      REQUIRE(c.location(xc(2)) == 0);
      const double pd = p.Kp1 * e + p.Kd * (e - e1) / p.Ts;
      const double pd1 = p.Kp1 * e1 + p.Kd * (e1 - e2) / p.Ts;
      const double o = p.b * (pd + pd1) - p.a1 * o1 - p.a2 * o2;
      const double got = c.C[0].dot(xc) + c.D[0] * e;
      CHECK(got == doctest::Approx(o).epsilon(1e-9).scale(1e-6));
      o2 = o1;
      o1 = got;
      e2 = e1;
      e1 = e;
      xc = c.A * xc + c.B * e;
    }
  }

  TEST_CASE("third controller state stores the previous error") {
    const SwitchingController c = build_feedback_controller(default_bench_config().control.feedback);
    std::mt19937_64 rng(53);
    Vec xc = Vec::Zero(3);
    double prev = 0.0;
    for (int k = 0; k < 100; ++k) {
      CHECK(xc(2) == prev);
      const double e = fixtures::uniform(rng, -0.005, 0.005);
      xc = c.A * xc + c.B * e;
      prev = e;
    }
  }

  TEST_CASE("monolithic model matches the sample-by-sample closed loop") {
    const BenchConfig cfg = default_bench_config();
    const StateSpace plant = zpk_to_state_space(cfg.control.plant);
    const SwitchingController ctrl = build_feedback_controller(cfg.control.feedback);
    ReferenceProfile prof;
    prof.samples = 400;
    const Trajectory r = make_reference(prof);
    const PwaModel m = build_monolithic(plant, ctrl, r);
    CHECK(m.n_x() == 7);
    CHECK(m.partition().signatures() == std::vector<std::vector<Signature>>{{{1, 1}}, {{1, 0}, {0, 1}}});
    std::mt19937_64 rng(52);
    const Vec u = 0.5 * fixtures::randn(rng, 400, 1);
    const SimulationResult sim = simulate(m, Vec::Zero(7), Trajectory::scalar(0, u, "u"));
    const ClosedLoopRun cl = simulate_closed_loop(plant, ctrl, r.row(), u, Vec(), Vec());
    CHECK((sim.y.row() - cl.y).cwiseAbs().maxCoeff() <= 1e-12 * cl.y.cwiseAbs().maxCoeff());
    CHECK(sim.locations == cl.locations);
    CHECK(std::count(cl.locations.begin(), cl.locations.end(), 1) > 0);
    for (long k = 0; k < 400; k += 37) CHECK(m.matrices(0, k).D.isZero(0.0));
  }

  TEST_CASE("closed loop has unit DC gain") {
    const BenchConfig cfg = default_bench_config();
    for (const ModelConfig& mc : {cfg.truth, cfg.control}) {
      const Vec r = Vec::Constant(3000, 0.01);
      const ClosedLoopRun cl = simulate_closed_loop(zpk_to_state_space(mc.plant), build_feedback_controller(mc.feedback),
                                                    r, Vec::Zero(3000), Vec(), Vec());
      CHECK(cl.y(2999) == doctest::Approx(0.01).epsilon(1e-3));
    }
  }

  TEST_CASE("reference profiles") {
    ReferenceProfile zero;
    zero.amplitude = 0.0;
    CHECK(make_reference(zero).samples.isZero(0.0));
    const Trajectory r = make_reference(ReferenceProfile{});
    CHECK(r.size() == 1999);
    CHECK(r.samples.maxCoeff() <= 0.3);
    CHECK(r.samples.maxCoeff() == doctest::Approx(0.15));
    CHECK(r.scalar_at(0) == 0.0);
    CHECK(r.scalar_at(1998) == 0.0);
    CHECK(downsample2(r).size() == 1000);
  }

  TEST_CASE("resampling") {
    const Trajectory d = downsample2(Trajectory::scalar(0, v({1, 2, 3, 4}), "r"));
    CHECK(d.row() == v({1, 3}));
    CHECK(upsample2_zoh(Trajectory::scalar(0, v({1, 2}), "r")).row() == v({1, 1, 2, 2}));
    const Trajectory pairs = Trajectory::scalar(0, v({5, 5, -1, -1, 2, 2}), "r");
    CHECK(upsample2_zoh(downsample2(pairs)).row() == pairs.row());
    // An odd-length truth signal keeps its final sample.
    const Trajectory odd = downsample2(Trajectory::scalar(0, Vec::LinSpaced(1999, 0, 1998), "r"));
    CHECK(odd.size() == 1000);
    CHECK(odd.scalar_at(999) == 1998.0);
  }

  TEST_CASE("noise") {
    const Trajectory base = Trajectory::scalar(0, Vec::LinSpaced(10, 0, 1), "y");
    CHECK(add_noise(base, 0.0, 7).samples == base.samples);
    CHECK(add_noise(base, 0.1, 7).samples == add_noise(base, 0.1, 7).samples);
    CHECK(add_noise(base, 0.1, 7).samples != add_noise(base, 0.1, 8).samples);
    const BenchConfig cfg = default_bench_config();
    CHECK(cfg.sigma_process == 0.03);
    CHECK(cfg.sigma_measure == 50e-6);
    const Vec n = add_noise(Trajectory::scalar(0, Vec::Zero(100000), "w"), 0.03, 99).row();
    const double mean = n.mean();
    const double var = (n.array() - mean).square().sum() / (n.size() - 1);
    CHECK(std::abs(var / (0.03 * 0.03) - 1.0) < 0.05);
    CHECK(derive_seed(1, 0, 0) != derive_seed(1, 0, 1));
    CHECK(derive_seed(1, 0, 0) != derive_seed(1, 1, 0));
    CHECK(derive_seed(1, 2, 1) == derive_seed(1, 2, 1));
  }

  TEST_CASE("gain line search") {
    // Monotone up to 37.5.
    auto ok = [](double g) { return g <= 37.5; };
    CHECK(tune_gain_line_search(ok, {10, 20, 30, 40, 50}, false).gain == 30.0);
    const GainSearchResult refined = tune_gain_line_search(ok, {50, 10, 40, 20, 30}, true);
    CHECK(refined.gain == 37.0);
    for (const auto& [g, mono] : refined.evaluated) CHECK(mono == ok(g));
    CHECK(tune_gain_line_search(ok, {12}, true).gain == 12.0);
    CHECK_THROWS_AS(tune_gain_line_search(ok, {40, 60}, true), Error);
  }

  TEST_CASE("bench setup") {
    const PrintheadBench bench(default_bench_config());
    CHECK(bench.mu() == 1);
    CHECK(bench.lifted_size() == 999);
    CHECK(bench.reference_control().size() == 1000);
    CHECK(bench.decoupling().n_s == 5);
    CHECK(bench.decoupling().n_u == 2);
    CHECK(bench.filters().E.diagonal().sum() == 999 - 70);
    BenchConfig bad = default_bench_config();
    bad.truth.plant.Ts = 0.0015;
    CHECK_THROWS_AS(PrintheadBench{bad}, Error);
  }

  TEST_CASE("benchmark scenarios") {
    const BenchResults& r = default_results();
    const ScenarioResult& il = r.find("ililc");
    const ScenarioResult& fb = r.find("feedback-only");
    CHECK(il.trials.size() == 9);
    // Feedback-only is the zero-input trial with the same noise realization.
    CHECK(fb.nrmse == il.trials.front().nrmse);
    CHECK(fb.y == il.trials.front().y);
    CHECK(il.nrmse < r.find("gradient").nrmse);
    CHECK(r.find("gradient").nrmse < r.find("ptype").nrmse);
    CHECK(r.find("ptype").nrmse < fb.nrmse);
    CHECK(r.find("stable-inversion").nrmse < fb.nrmse);
    CHECK(r.self_inversion_nrmse < 1e-5);
    CHECK_THROWS_AS(r.find("none"), Error);
  }

  TEST_CASE("benchmark is deterministic") {
    const BenchResults again = run_benchmark(default_bench_config());
    const BenchResults& first = default_results();
    REQUIRE(again.scenarios.size() == first.scenarios.size());
    for (std::size_t i = 0; i < again.scenarios.size(); ++i) {
      CHECK(again.scenarios[i].name == first.scenarios[i].name);
      CHECK(again.scenarios[i].y == first.scenarios[i].y);
      CHECK(again.scenarios[i].u == first.scenarios[i].u);
    }
  }
}
