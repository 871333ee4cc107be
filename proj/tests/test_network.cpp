#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "spikesig/corpus.hpp"
#include "spikesig/dsp.hpp"
#include "spikesig/network.hpp"

using namespace spikesig;
namespace fs = std::filesystem;

namespace {

NetworkConfig small_config()
{
	NetworkConfig cfg;
	cfg.n_frames = 4;
	cfg.n_bands = 2;
	cfg.n_outputs = 3;
	cfg.g_train = 60.0;
	return cfg;
}

// Pairing by explicit search, spike by spike.
SynapseMatrix reference_stdp(SynapseMatrix w, const SpikeRecord &rec, int target, const StdpConfig &cfg)
{
	for (int j = 0; j < w.cols; ++j) {
		const auto &post = rec.post[j];
		if (post.empty())
			continue;
		const auto regime = j == target ? StdpRegime::hebbian : StdpRegime::anti_hebbian;
		for (int k = 0; k < w.rows; ++k) {
			const auto &pre = rec.pre[k];
			double factor = 1.0;
			for (double tp : post) {
				const double *best = nullptr;
				for (const double &tq : pre)
					if (tq <= tp)
						best = &tq;
				if (best)
					factor = std::max(0.0, factor * (1.0 + stdp_dw(tp - *best, cfg, regime)));
			}
			for (double tq : pre) {
				const double *best = nullptr;
				for (const double &tp : post)
					if (tp < tq)
						best = &tp;
				if (best)
					factor = std::max(0.0, factor * (1.0 + stdp_dw(*best - tq, cfg, regime)));
			}
			w(k, j) *= factor;
		}
	}
	return w;
}

std::vector<double> random_train(std::mt19937_64 &rng, int max_n, double duration)
{
	std::uniform_int_distribution<int> n(0, max_n);
	std::uniform_int_distribution<int> step(0, static_cast<int>(duration * 10) - 1);
	std::vector<double> t;
	const int count = n(rng);
	for (int i = 0; i < count; ++i)
		t.push_back(step(rng) * 0.1);
	std::sort(t.begin(), t.end());
	t.erase(std::unique(t.begin(), t.end()), t.end());
	return t;
}

} // namespace

TEST(Config, DefaultsAndValidation)
{
	NetworkConfig cfg;
	EXPECT_EQ(cfg.n_inputs(), 200);
	EXPECT_EQ(cfg.n_outputs, 10);
	EXPECT_EQ(cfg.t_train, 100.0);
	EXPECT_EQ(cfg.t_frame, 5.0);
	EXPECT_EQ(cfg.epochs, 100);
	EXPECT_EQ(cfg.tau_syn, 2.0);
	EXPECT_NO_THROW(cfg.validate());
	cfg.t_frame = 5.05;
	EXPECT_THROW(cfg.validate(), config_error);
	cfg = {};
	cfg.n_outputs = 1;
	EXPECT_THROW(cfg.validate(), config_error);
	cfg = {};
	cfg.g_train = -1.0;
	EXPECT_THROW(cfg.validate(), config_error);

	StdpConfig s;
	EXPECT_NO_THROW(s.validate());
	s.b_minus = 0.5;
	EXPECT_THROW(s.validate(), config_error);
	s = {};
	s.tau_plus = 0.0;
	EXPECT_THROW(s.validate(), config_error);
}

TEST(StdpWindow, HandValues)
{
	const StdpConfig cfg;
	EXPECT_DOUBLE_EQ(stdp_dw(0.0, cfg, StdpRegime::hebbian), 0.01);
	EXPECT_NEAR(stdp_dw(-5.0, cfg, StdpRegime::hebbian), -0.01 * std::exp(-0.5), 1e-17);
	EXPECT_NEAR(stdp_dw(-5.0, cfg, StdpRegime::hebbian), -0.00607, 5e-6);
	EXPECT_NEAR(stdp_dw(5.0, cfg, StdpRegime::hebbian), 0.01 * std::exp(-0.5), 1e-17);
	EXPECT_DOUBLE_EQ(stdp_dw(0.0, cfg, StdpRegime::anti_hebbian), -0.01);
}

TEST(StdpWindow, AntiIsCaseSwapped)
{
	std::mt19937_64 rng(1);
	std::uniform_real_distribution<double> dt(-50.0, 50.0), amp(0.1, 3.0), tau(1.0, 30.0);
	for (int i = 0; i < 1000; ++i) {
		StdpConfig cfg{amp(rng), -amp(rng), tau(rng), tau(rng)};
		const double d = dt(rng);
		if (d == 0.0)
			continue;
		// the anti-Hebbian causal branch is the Hebbian acausal body and vice versa
		EXPECT_EQ(stdp_dw(d, cfg, StdpRegime::anti_hebbian), stdp_dw(-d, cfg, StdpRegime::hebbian));
		const double bound = 0.01 * std::max(cfg.a_plus, std::abs(cfg.b_minus));
		EXPECT_LE(std::abs(stdp_dw(d, cfg, StdpRegime::hebbian)), bound);
		EXPECT_LE(std::abs(stdp_dw(d, cfg, StdpRegime::anti_hebbian)), bound);
	}
}

TEST(StdpWindow, SignsAndDecay)
{
	const StdpConfig cfg; // A = -B, tau+ = tau-
	for (double d = -60.0; d <= 60.0; d += 0.7) {
		const double h = stdp_dw(d, cfg, StdpRegime::hebbian), a = stdp_dw(d, cfg, StdpRegime::anti_hebbian);
		EXPECT_EQ(std::signbit(h), !std::signbit(a));
		EXPECT_EQ(h > 0, d >= 0);
		if (std::abs(d) > 0.7)
			EXPECT_LT(std::abs(h), std::abs(stdp_dw(d > 0 ? d - 0.7 : d + 0.7, cfg, StdpRegime::hebbian)));
	}
}

TEST(L1, Normalization)
{
	SynapseMatrix w(3, 2, 2.0);
	w.k = {2, 1, 3, 1, 5, 2};
	const auto n = l1_renormalize(w);
	EXPECT_DOUBLE_EQ(n(0, 0), 0.2);
	EXPECT_DOUBLE_EQ(n(1, 0), 0.3);
	EXPECT_DOUBLE_EQ(n(2, 0), 0.5);
	EXPECT_DOUBLE_EQ(n(2, 1), 0.5);
	const auto again = l1_renormalize(n);
	for (std::size_t i = 0; i < n.k.size(); ++i)
		EXPECT_NEAR(again.k[i], n.k[i], 1e-15);
	SynapseMatrix z(2, 2, 2.0);
	z.k = {1, 0, 1, 0};
	EXPECT_THROW(l1_renormalize(z), degenerate_error);
}

TEST(L1, ArgmaxPreserved)
{
	std::mt19937_64 rng(2);
	std::uniform_real_distribution<double> u(0.0, 10.0);
	SynapseMatrix w(50, 4, 2.0);
	for (double &v : w.k)
		v = u(rng);
	const auto n = l1_renormalize(w);
	for (int c = 0; c < 4; ++c) {
		int a = 0, b = 0;
		for (int r = 1; r < 50; ++r) {
			if (w(r, c) > w(a, c))
				a = r;
			if (n(r, c) > n(b, c))
				b = r;
		}
		EXPECT_EQ(a, b);
	}
}

TEST(Init, NormalizedAndSeeded)
{
	const NetworkConfig cfg;
	for (std::uint64_t seed = 0; seed < 100; ++seed) {
		const auto w = init_weights(cfg, seed);
		ASSERT_EQ(w.rows, 200);
		ASSERT_EQ(w.cols, 10);
		for (int c = 0; c < 10; ++c)
			ASSERT_NEAR(w.column_l1(c), 1.0, 1e-12);
		for (double v : w.k) {
			ASSERT_GT(v, 0.0);
			ASSERT_LE(v, 1.0);
		}
	}
	EXPECT_NE(init_weights(cfg, 1), init_weights(cfg, 2));
	EXPECT_EQ(init_weights(cfg, 3), init_weights(cfg, 3));
}

TEST(ApplyStdp, TeacherSigns)
{
	SynapseMatrix w(2, 2, 2.0, 0.5);
	SpikeRecord rec;
	rec.pre = {{10.0}, {}};
	rec.post = {{11.0}, {11.0}};
	const auto out = apply_stdp(w, rec, 0, StdpConfig{});
	EXPECT_GT(out(0, 0), 0.5); // target: causal pair potentiates
	EXPECT_LT(out(0, 1), 0.5); // non-target: same pair depresses
	EXPECT_EQ(out(1, 0), 0.5); // silent afferent untouched
	EXPECT_DOUBLE_EQ(out(0, 0), 0.5 * (1.0 + 0.01 * std::exp(-0.1)));

	SpikeRecord quiet;
	quiet.pre = {{1.0, 2.0}, {3.0}};
	quiet.post = {{}, {}};
	EXPECT_EQ(apply_stdp(w, quiet, 1, StdpConfig{}), w);
}

TEST(ApplyStdp, PreAfterLastPostIsDepressedForTarget)
{
	SynapseMatrix w(1, 1, 2.0, 1.0);
	SpikeRecord rec;
	rec.pre = {{20.0}};
	rec.post = {{15.0}};
	const auto out = apply_stdp(w, rec, 0, StdpConfig{});
	EXPECT_DOUBLE_EQ(out(0, 0), 1.0 - 0.01 * std::exp(-0.5));
}

TEST(ApplyStdp, MatchesReferencePairing)
{
	std::mt19937_64 rng(9);
	std::uniform_real_distribution<double> u(0.0, 1.0);
	for (int trial = 0; trial < 200; ++trial) {
		SynapseMatrix w(6, 3, 2.0);
		for (double &v : w.k)
			v = u(rng);
		SpikeRecord rec;
		for (int k = 0; k < 6; ++k)
			rec.pre.push_back(random_train(rng, 8, 30.0));
		for (int j = 0; j < 3; ++j)
			rec.post.push_back(random_train(rng, 5, 30.0));
		StdpConfig cfg{0.5 + u(rng), -0.5 - u(rng), 2.0 + 20 * u(rng), 2.0 + 20 * u(rng)};
		const int target = trial % 3;
		const auto fast = apply_stdp(w, rec, target, cfg), slow = reference_stdp(w, rec, target, cfg);
		for (std::size_t i = 0; i < w.k.size(); ++i)
			ASSERT_NEAR(fast.k[i], slow.k[i], 1e-15);
	}
}

TEST(ApplyStdp, ClampsAtZero)
{
	SynapseMatrix w(1, 2, 2.0, 1.0);
	SpikeRecord rec;
	rec.pre = {{1.0}};
	rec.post = {{1.5}, {1.5}};
	const auto out = apply_stdp(w, rec, 0, StdpConfig{500.0, -500.0, 10.0, 10.0});
	EXPECT_EQ(out(0, 1), 0.0);
	EXPECT_GT(out(0, 0), 1.0);
	// two oversized depressions must not cancel back to a positive weight
	SpikeRecord twice;
	twice.pre = {{2.0, 4.0}};
	twice.post = {{1.5, 3.5}, {}};
	EXPECT_EQ(apply_stdp(w, twice, 0, StdpConfig{1.0, -500.0, 10.0, 10.0})(0, 0), 0.0);
	EXPECT_THROW(apply_stdp(w, rec, 2, StdpConfig{}), input_error);
}

TEST(Encode, MatchesSingleNeuronRuns)
{
	const auto cfg = small_config();
	FeatureMatrix cur(4, 2);
	cur.values = {0, 60, 100, 150, 200, 250, 300, 55};
	const auto r = encode_inputs(cur, cfg);
	EXPECT_EQ(r.n_steps, 1000u);
	std::size_t total = 0;
	for (int k = 0; k < 8; ++k) {
		EXPECT_EQ(r.times[k], run(cfg.neuron, cur.values[k], 100.0).train.times);
		total += r.times[k].size();
	}
	EXPECT_EQ(r.events.size(), total);
	EXPECT_TRUE(std::is_sorted(r.events.begin(), r.events.end(),
	                           [](const auto &a, const auto &b) { return a.first < b.first; }));
	FeatureMatrix wrong(3, 2);
	EXPECT_THROW(encode_inputs(wrong, cfg), input_error);
}

// z spikes from the recursive simulation equal those of a direct simulation
// that sums every alpha kernel explicitly.
TEST(Presentation, MatchesDirectKernelSum)
{
	const auto cfg = small_config();
	std::mt19937_64 rng(4);
	std::uniform_real_distribution<double> u(0.0, 1.0);
	for (int trial = 0; trial < 5; ++trial) {
		FeatureMatrix cur(4, 2);
		for (double &v : cur.values)
			v = 80.0 + 200.0 * u(rng);
		SynapseMatrix w(8, 3, cfg.tau_syn);
		for (double &v : w.k)
			v = u(rng);
		l1_renormalize_in_place(w);
		const auto raster = encode_inputs(cur, cfg);
		const auto rec = present_training(raster, w, cfg);

		std::vector<std::vector<double>> direct(3);
		std::vector<NeuronState> z(3, NeuronState::resting(cfg.neuron));
		for (std::size_t step = 0; step < raster.n_steps; ++step) {
			const double t = step * cfg.dt();
			for (int j = 0; j < 3; ++j) {
				double g = 0.0;
				for (int k = 0; k < 8; ++k)
					for (double s : raster.times[k])
						if (s < t - 1e-9)
							g += alpha_kernel(t - s, w(k, j), cfg.tau_syn);
				if (advance(z[j], cfg.neuron, synaptic_current(cfg.g_train * g, z[j].v)))
					direct[j].push_back(t);
			}
		}
		std::size_t n = 0;
		for (int j = 0; j < 3; ++j) {
			EXPECT_EQ(rec.post[j], direct[j]) << "trial " << trial << " unit " << j;
			n += direct[j].size();
		}
		EXPECT_GT(n, 0u);
		EXPECT_EQ(rec.pre, raster.times);
	}
}

TEST(Train, ZeroEpochsReturnsInitialWeights)
{
	auto cfg = small_config();
	cfg.epochs = 0;
	FeatureMatrix a(4, 2, 150.0);
	a.label = 1;
	const std::vector<FeatureMatrix> data{a};
	const auto r = train(data, cfg, StdpConfig{}, 17);
	std::mt19937_64 rng(17);
	EXPECT_EQ(r.weights, init_weights(cfg, rng()));
	EXPECT_TRUE(r.log.empty());
}

TEST(Train, NormalizedAfterEverySampleAndDeterministic)
{
	const auto clips = synth_corpus(5, 5);
	std::vector<FeatureMatrix> fm;
	for (const auto &c : clips)
		fm.push_back(features(c, FrameSpec{}, BandSpec{}));
	const auto sc = CurrentScaler::fit(fm);
	std::vector<FeatureMatrix> cur;
	for (const auto &f : fm)
		cur.push_back(scale_to_current(f, sc));
	NetworkConfig cfg;
	cfg.epochs = 3;
	std::size_t calls = 0;
	double worst = 0.0;
	bool negative = false;
	const auto r = train(cur, cfg, StdpConfig{}, 8, [&](int, std::size_t, const SynapseMatrix &w) {
		++calls;
		for (int c = 0; c < w.cols; ++c)
			worst = std::max(worst, std::abs(w.column_l1(c) - 1.0));
		for (double v : w.k)
			negative |= v < 0.0;
	});
	EXPECT_EQ(calls, 3u * cur.size());
	EXPECT_LE(worst, 1e-9);
	EXPECT_FALSE(negative);
	ASSERT_EQ(r.log.size(), 3u);
	for (int e = 0; e < 3; ++e)
		EXPECT_EQ(r.log[e].epoch, e + 1);
	EXPECT_EQ(train(cur, cfg, StdpConfig{}, 8).weights, r.weights);
	EXPECT_NE(train(cur, cfg, StdpConfig{}, 9).weights, r.weights);

	FeatureMatrix unlabeled = cur[0];
	unlabeled.label.reset();
	EXPECT_THROW(train(std::vector<FeatureMatrix>{unlabeled}, cfg, StdpConfig{}, 1), input_error);
}

TEST(Train, DegenerateColumnReported)
{
	// a single afferent whose synapse is wiped out by an oversized LTD step
	NetworkConfig cfg;
	cfg.n_frames = 2;
	cfg.n_bands = 1;
	cfg.n_outputs = 2;
	cfg.g_train = 400.0;
	cfg.epochs = 1;
	FeatureMatrix cur(2, 1, 250.0);
	cur.label = 0;
	const std::vector<FeatureMatrix> data{cur};
	EXPECT_THROW(train(data, cfg, StdpConfig{1.0, -1e6, 10.0, 10.0}, 1), degenerate_error);
}

TEST(Export, LogAndWeightImages)
{
	std::vector<EpochLog> log{{1, 2e-5, 1.5, 0.75}, {2, 1e-5, 1.25, 0.5}};
	const fs::path dir = fs::temp_directory_path() / "spikesig_net_export";
	fs::create_directories(dir);
	write_training_log_csv(log, dir / "log.csv", "seed=3");
	std::ifstream in(dir / "log.csv");
	std::string l1, l2, l3;
	std::getline(in, l1);
	std::getline(in, l2);
	std::getline(in, l3);
	EXPECT_EQ(l1, "# seed=3");
	EXPECT_EQ(l2, "epoch,mean_abs_dK,spikes_target,spikes_nontarget");
	EXPECT_EQ(l3, "1,2e-05,1.5,0.75");

	const auto w = init_weights(NetworkConfig{}, 1);
	write_weight_image_pgm(w, 3, 40, 5, dir / "w3.pgm");
	EXPECT_EQ(fs::file_size(dir / "w3.pgm"), std::string("P5\n5 40\n255\n").size() + 200);
	EXPECT_THROW(write_weight_image_pgm(w, 10, 40, 5, dir / "bad.pgm"), input_error);
	fs::remove_all(dir);
}
