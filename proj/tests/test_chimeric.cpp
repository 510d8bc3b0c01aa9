#include "chimatch/chimeric.hpp"
#include "chimatch/synthgen.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace chimatch;

namespace {

Dataset make_dataset(const std::string& name, const std::vector<std::string>& names, const Matrix& v,
                     std::size_t mapped)
{
    std::vector<FeatureMeta> f(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        f[i].name = names[i];
    }
    return Dataset(name, v, f, mapped);
}

// Two latent factors drive every column; small independent noise on top.
Matrix factor_data(Eigen::Index n, const Matrix& loadings, double noise, Rng& rng)
{
    std::normal_distribution<double> nd;
    Matrix z(n, loadings.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z.data()[i] = nd(rng);
    }
    Matrix x = z * loadings;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] += noise * nd(rng);
    }
    return x;
}

ChimericConfig small_config()
{
    ChimericConfig c;
    c.latent_dim = 2;
    c.hidden = {16, 8};
    c.dropout = 0.0;
    c.epochs = 30;
    c.batch_size = 64;
    c.seed = 17;
    return c;
}

std::vector<std::string> names(const std::string& prefix, int count)
{
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(prefix + std::to_string(i));
    }
    return out;
}

} // namespace

TEST_CASE("chimeric config validation and json")
{
    ChimericConfig c;
    c.latent_dim = 5;
    CHECK_NOTHROW(c.validate(6, 10));
    CHECK_THROWS_AS(c.validate(5, 10), Error);
    c.w_cy = -0.1;
    CHECK_THROWS_AS(c.validate(20, 20), Error);
    c.w_cy = 0.0;
    c.hidden = {120, 70};
    c.latent_activation = Activation::sigmoid;
    const ChimericConfig back = chimeric_config_from_json(to_json(c));
    CHECK(back.hidden == c.hidden);
    CHECK(back.w_cy == 0.0);
    CHECK(back.latent_activation == Activation::sigmoid);
    CHECK(to_json(back) == to_json(c));
    // partial json only overrides the keys it names
    const ChimericConfig partial = chimeric_config_from_json(nlohmann::json{{"epochs", 3}}, c);
    CHECK(partial.epochs == 3);
    CHECK(partial.hidden == c.hidden);
}

TEST_CASE("model construction enforces a shared latent dimension")
{
    ChimericConfig c = small_config();
    std::vector<FeatureMeta> fa(4);
    std::vector<FeatureMeta> fb(6);
    for (std::size_t i = 0; i < fa.size(); ++i) {
        fa[i].name = "a" + std::to_string(i);
    }
    for (std::size_t i = 0; i < fb.size(); ++i) {
        fb[i].name = "b" + std::to_string(i);
    }
    const ChimericModel m(c, fa, fb, 2);
    CHECK(m.encoder_a().out() == 2);
    CHECK(m.encoder_b().out() == 2);
    CHECK(m.decoder_a().out() == 4);
    CHECK(m.decoder_b().out() == 6);
    c.latent_dim = 4;
    CHECK_THROWS_AS(ChimericModel(c, fa, fb, 2), Error);
}

TEST_CASE("train_chimeric rejects bad inputs")
{
    Rng rng(1);
    Matrix load(2, 5);
    load.setRandom();
    const Matrix x = factor_data(100, load, 0.1, rng);
    const auto a = make_dataset("A", names("x", 5), x, 0);
    CHECK_THROWS_AS(train_chimeric(a, a, small_config()), Error);
    const auto a2 = a.with_mapped_count(2);
    const auto b1 = a.with_mapped_count(1);
    CHECK_THROWS_AS(train_chimeric(a2, b1, small_config()), Error);
}

TEST_CASE("cross loss reads only the known-mapped columns")
{
    Rng rng(2);
    const ChimericConfig cfg = small_config();
    std::vector<FeatureMeta> fa(4);
    std::vector<FeatureMeta> fb(5);
    for (std::size_t i = 0; i < 4; ++i) {
        fa[i].name = "a" + std::to_string(i);
    }
    for (std::size_t i = 0; i < 5; ++i) {
        fb[i].name = "b" + std::to_string(i);
    }
    const ChimericModel m(cfg, fa, fb, 2);
    Matrix load_a(2, 4);
    Matrix load_b(2, 5);
    load_a.setRandom();
    load_b.setRandom();
    const Matrix xa = factor_data(32, load_a, 0.2, rng);
    const Matrix xb = factor_data(40, load_b, 0.2, rng);
    const Vector w = Vector::Ones(2);
    const auto base = chimeric_batch_loss(m.encoder_a(), m.decoder_a(), m.encoder_b(), m.decoder_b(), xa, xb, 2, w,
                                          w, cfg, nullptr);

    // Changing how g_B emits its unmapped columns changes every loss that
    // reads them, but not the cross losses.
    Mlp g_b = m.decoder_b();
    auto& last = g_b.mutable_layer(g_b.depth() - 1);
    last.weight.rightCols(3).array() += 0.7;
    last.bias.tail(3).array() -= 0.4;
    const auto moved = chimeric_batch_loss(m.encoder_a(), m.decoder_a(), m.encoder_b(), g_b, xa, xb, 2, w, w, cfg,
                                           nullptr);
    CHECK(moved.loss.ce_a == doctest::Approx(base.loss.ce_a).epsilon(1e-14));
    CHECK(moved.loss.ce_b == doctest::Approx(base.loss.ce_b).epsilon(1e-14));
    CHECK(moved.loss.ae_b != base.loss.ae_b);

    // the CE gradient never reaches the unmapped output rows of g_B's last layer
    ChimericConfig only_ce = cfg;
    only_ce.w_cy = 0.0;
    only_ce.w_o = 0.0;
    Vector zero_a = Vector::Zero(2);
    const auto g = chimeric_batch_loss(m.encoder_a(), m.decoder_a(), m.encoder_b(), m.decoder_b(), xa,
                                       Matrix::Zero(40, 5), 2, w, zero_a, only_ce, nullptr);
    // the A side contributes only CE to g_B; B's zero batch adds AE through g_B
    const auto ae_only = chimeric_batch_loss(m.encoder_a(), m.decoder_a(), m.encoder_b(), m.decoder_b(), xa,
                                             Matrix::Zero(40, 5), 2, zero_a, zero_a, only_ce, nullptr);
    const Matrix diff = g.g_b.weight.back() - ae_only.g_b.weight.back();
    CHECK(diff.leftCols(2).cwiseAbs().maxCoeff() > 0.0);
    CHECK(diff.rightCols(3).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("batch loss gradients match finite differences")
{
    Rng rng(3);
    ChimericConfig cfg = small_config();
    cfg.hidden = {5, 4};
    cfg.w_c = 0.7;
    cfg.w_cy = 0.4;
    cfg.w_o = 0.3;
    std::vector<FeatureMeta> fa(4);
    std::vector<FeatureMeta> fb(3);
    for (std::size_t i = 0; i < 4; ++i) {
        fa[i].name = "a" + std::to_string(i);
    }
    for (std::size_t i = 0; i < 3; ++i) {
        fb[i].name = "b" + std::to_string(i);
    }
    const ChimericModel m(cfg, fa, fb, 2);
    std::array<Mlp, 4> nets = {m.encoder_a(), m.decoder_a(), m.encoder_b(), m.decoder_b()};
    std::normal_distribution<double> nd(0.0, 0.2);
    for (auto& net : nets) {
        for (std::size_t l = 0; l < net.depth(); ++l) {
            for (auto& b : net.mutable_layer(l).bias) {
                b = nd(rng);
            }
        }
    }
    Matrix xa(6, 4);
    Matrix xb(7, 3);
    xa.setRandom();
    xb.setRandom();
    Vector wa(2);
    wa << 1.0, 0.5;
    const Vector wb = Vector::Ones(2);
    const auto total = [&] {
        return chimeric_batch_loss(nets[0], nets[1], nets[2], nets[3], xa, xb, 2, wa, wb, cfg, nullptr).loss.total;
    };
    const auto analytic = chimeric_batch_loss(nets[0], nets[1], nets[2], nets[3], xa, xb, 2, wa, wb, cfg, nullptr);
    const std::array<const Gradients*, 4> grads = {&analytic.f_a, &analytic.g_a, &analytic.f_b, &analytic.g_b};
    const double eps = 1e-6;
    double worst = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        for (std::size_t l = 0; l < nets[k].depth(); ++l) {
            const Matrix& gw = grads[k]->weight[l];
            for (Eigen::Index i = 0; i < gw.rows(); ++i) {
                for (Eigen::Index j = 0; j < gw.cols(); ++j) {
                    const double w0 = nets[k].layer(l).weight(i, j);
                    nets[k].mutable_layer(l).weight(i, j) = w0 + eps;
                    const double up = total();
                    nets[k].mutable_layer(l).weight(i, j) = w0 - eps;
                    const double down = total();
                    nets[k].mutable_layer(l).weight(i, j) = w0;
                    const double num = (up - down) / (2 * eps);
                    worst = std::max(worst, std::abs(num - gw(i, j)) / std::max({std::abs(num), std::abs(gw(i, j)), 1e-6}));
                }
            }
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("self matching recovers the identity")
{
    Rng rng(4);
    Matrix load(2, 6);
    load << 1.0, 0.8, 0.2, -0.5, 0.6, 0.1, 0.1, 0.4, 1.0, 0.7, -0.6, 0.9;
    const Matrix x = factor_data(1000, load, 0.2, rng);
    const auto ds = make_dataset("A", names("x", 6), x, 6);
    const ChimericModel m = train_chimeric(ds, ds, small_config());
    const Dataset z = m.translate(ds, TranslateDirection::a_to_b);
    const auto dep = chimeric_dependence(ds, z);
    CHECK(dep.values.diagonal().mean() > 0.9);
    CHECK(m.trained());
    CHECK(m.trace().size() == 30);
}

TEST_CASE("translate is deterministic and finite")
{
    Rng rng(5);
    Matrix la(2, 5);
    Matrix lb(2, 4);
    la.setRandom();
    lb.setRandom();
    const auto a = make_dataset("A", names("a", 5), factor_data(300, la, 0.3, rng), 2);
    const auto b = make_dataset("B", names("b", 4), factor_data(300, lb, 0.3, rng), 2);
    ChimericConfig cfg = small_config();
    cfg.epochs = 3;
    cfg.dropout = 0.3;
    const ChimericModel m = train_chimeric(a, b, cfg);
    const Matrix z1 = m.translate(a.values(), TranslateDirection::a_to_b);
    const Matrix z2 = m.translate(a.values(), TranslateDirection::a_to_b);
    CHECK(z1 == z2);
    CHECK(z1.cols() == 4);
    CHECK(m.translate(Matrix::Zero(2, 5), TranslateDirection::a_to_b).allFinite());
    CHECK(m.translate(b.values(), TranslateDirection::b_to_a).cols() == 5);
    CHECK_THROWS_AS(m.translate(b.values(), TranslateDirection::a_to_b), Error);
    CHECK(m.reconstruct(a.values(), TranslateDirection::a_to_b).cols() == 5);

    const Dataset zd = m.translate(a, TranslateDirection::a_to_b);
    CHECK(zd.feature_names() == b.feature_names());
    CHECK(zd.values() == z1);
    CHECK_THROWS_AS(reconstruct_unshared(m, a, "nope"), Error);

    SUBCASE("json round trip")
    {
        const ChimericModel back = ChimericModel::from_json(m.to_json());
        CHECK(back.translate(a.values(), TranslateDirection::a_to_b) == z1);
        CHECK(back.mapped_count() == 2);
        CHECK(back.features_b().size() == 4);
    }
    SUBCASE("loss trace csv")
    {
        std::ostringstream os;
        write_loss_trace(os, m.trace());
        const std::string s = os.str();
        CHECK(s.rfind("epoch,component,value\n", 0) == 0);
        CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 3 * 10);
        CHECK(s.find("3,CE_A,") != std::string::npos);
    }
}

TEST_CASE("decoupled objective leaves cross loss undriven")
{
    Rng rng(6);
    Matrix la(2, 5);
    Matrix lb(2, 5);
    la << 1.0, 0.8, 0.2, -0.5, 0.6, 0.1, 0.4, 1.0, 0.7, -0.6;
    lb = la;
    lb.col(4) << 0.3, 0.9;
    Matrix xa = factor_data(600, la, 0.2, rng);
    Matrix xb = factor_data(600, lb, 0.2, rng);
    const auto a = make_dataset("A", names("a", 5), xa, 3);
    const auto b = make_dataset("B", names("b", 5), xb, 3);
    ChimericConfig cfg = small_config();
    cfg.epochs = 25;
    const ChimericModel coupled = train_chimeric(a, b, cfg);
    cfg.w_c = 0.0;
    cfg.w_cy = 0.0;
    const ChimericModel apart = train_chimeric(a, b, cfg);
    const auto ce = [](const ChimericModel& m) { return m.trace().back().ce_a + m.trace().back().ce_b; };
    const auto ae = [](const ChimericModel& m) { return m.trace().back().ae_a + m.trace().back().ae_b; };
    CHECK(ce(coupled) < 0.5 * ce(apart));
    // both versions still learn to reconstruct
    CHECK(ae(apart) < apart.trace().front().ae_a + apart.trace().front().ae_b);
    const auto& first = apart.trace().front();
    CHECK(ce(apart) > 0.5 * (first.ce_a + first.ce_b));
}

TEST_CASE("chimeric_dependence examples")
{
    Rng rng(7);
    Matrix x(200, 4);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = nd(rng);
    }
    const auto ds = make_dataset("A", names("x", 4), x, 0);
    SUBCASE("self gives a unit diagonal")
    {
        const auto s = chimeric_dependence(ds, ds);
        for (Eigen::Index i = 0; i < 4; ++i) {
            CHECK(s.values(i, i) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("constant translated column")
    {
        Matrix zc = x;
        zc.col(2).setConstant(3.0);
        const auto z = make_dataset("Z", names("z", 4), zc, 0);
        for (auto measure : {DependenceMeasure::pearson, DependenceMeasure::mutual_information}) {
            const auto s = chimeric_dependence(ds, z, measure);
            for (Eigen::Index i = 0; i < 4; ++i) {
                CHECK(s.values(i, 2) == 0.0);
                CHECK(s.degenerate(i, 2));
            }
        }
    }
    SUBCASE("permuted copy is recovered by row argmax")
    {
        const std::vector<Eigen::Index> perm = {2, 0, 3, 1};
        Matrix zp(200, 4);
        for (Eigen::Index j = 0; j < 4; ++j) {
            zp.col(perm[static_cast<std::size_t>(j)]) = x.col(j);
        }
        const auto z = make_dataset("Z", names("z", 4), zp, 0);
        for (auto measure : {DependenceMeasure::pearson, DependenceMeasure::mutual_information}) {
            const auto s = chimeric_dependence(ds, z, measure);
            for (Eigen::Index i = 0; i < 4; ++i) {
                Eigen::Index arg = 0;
                s.values.row(i).maxCoeff(&arg);
                CHECK(arg == perm[static_cast<std::size_t>(i)]);
            }
        }
    }
    SUBCASE("row mismatch")
    {
        const auto z = make_dataset("Z", names("z", 4), x.topRows(10), 0);
        CHECK_THROWS_AS(chimeric_dependence(ds, z), Error);
    }
}

TEST_CASE("reconstruct_unshared follows the signal")
{
    // B carries a surrogate-rich column s and an independent column u that A lacks
    Rng rng(8);
    const Eigen::Index n = 1500;
    Matrix load(2, 4);
    load << 1.0, 0.8, 0.2, -0.5, 0.1, 0.4, 1.0, 0.7;
    std::normal_distribution<double> nd;
    const auto draw = [&](Matrix& shared, Vector& s, Vector& u) {
        Matrix z(n, 2);
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            z.data()[i] = nd(rng);
        }
        shared = z * load;
        s.resize(n);
        u.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < 4; ++j) {
                shared(i, j) += 0.3 * nd(rng);
            }
            s(i) = 0.9 * z(i, 0) - 0.5 * z(i, 1) + 0.3 * nd(rng);
            u(i) = nd(rng);
        }
    };
    Matrix sa;
    Matrix sb;
    Vector s_truth;
    Vector u_truth;
    Vector s_b;
    Vector u_b;
    draw(sa, s_truth, u_truth);
    draw(sb, s_b, u_b);
    Matrix xb(n, 6);
    xb << sb, s_b, u_b;
    const auto a = make_dataset("A", names("m", 4), sa, 4);
    std::vector<std::string> bn = names("m", 4);
    bn.push_back("s");
    bn.push_back("u");
    const auto b = make_dataset("B", bn, xb, 4);
    ChimericConfig cfg = small_config();
    cfg.latent_dim = 2;
    const ChimericModel m = train_chimeric(a, b, cfg);
    const Vector s_hat = reconstruct_unshared(m, a, "s");
    const Vector u_hat = reconstruct_unshared(m, a, "u");
    CHECK(pearson(s_hat, s_truth).value > 0.3);
    CHECK(std::abs(pearson(u_hat, u_truth).value) < 0.1);
}

TEST_CASE("loss trace mostly decreases on the 20-D Gaussian benchmark")
{
    const Matrix cov = make_covariance({20, 10, 3});
    GeneratorSpec g;
    g.n_samples = 1000;
    g.seed = 1;
    const Dataset sa = sample(g, cov, "A");
    g.seed = 2;
    const Dataset sb = sample(g, cov, "B");
    ScenarioOptions o;
    o.k_mapped = 6;
    o.seed = 9;
    const Scenario sc = build_scenario(sa, sb, o);
    ChimericConfig cfg;
    cfg.seed = 4;
    const ChimericModel m = train_chimeric(sc.a, sc.b, cfg);
    int down = 0;
    for (std::size_t e = 1; e < m.trace().size(); ++e) {
        down += m.trace()[e].total <= m.trace()[e - 1].total ? 1 : 0;
    }
    CHECK(static_cast<double>(down) >= 0.8 * static_cast<double>(m.trace().size() - 1));
}
