#include "chimatch/chimeric.hpp"

#include "chimatch/log.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace chimatch {

void ChimericConfig::validate(std::size_t p_a, std::size_t p_b) const
{
    if (latent_dim < 1) {
        throw Error("chimeric: latent_dim must be positive");
    }
    if (static_cast<std::size_t>(latent_dim) >= std::min(p_a, p_b)) {
        throw Error("chimeric: latent_dim " + std::to_string(latent_dim) + " must be below min(p_A, p_B) = "
                    + std::to_string(std::min(p_a, p_b)));
    }
    if (w_c < 0.0 || w_cy < 0.0 || w_o < 0.0) {
        throw Error("chimeric: loss weights must be nonnegative");
    }
    if (hidden.empty()) {
        throw Error("chimeric: need at least one hidden layer");
    }
    if (batch_size < 2) {
        throw Error("chimeric: batch size must be at least 2");
    }
    if (epochs < 1) {
        throw Error("chimeric: epochs must be positive");
    }
    if (!(learning_rate > 0.0)) {
        throw Error("chimeric: learning rate must be positive");
    }
}

nlohmann::json to_json(const ChimericConfig& c)
{
    return {{"latent_dim", c.latent_dim},
            {"hidden", c.hidden},
            {"dropout", c.dropout},
            {"hidden_activation", to_string(c.hidden_activation)},
            {"latent_activation", to_string(c.latent_activation)},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"weight_decay", c.weight_decay},
            {"w_c", c.w_c},
            {"w_cy", c.w_cy},
            {"w_o", c.w_o},
            {"plateau_factor", c.plateau_factor},
            {"plateau_patience", c.plateau_patience},
            {"lr_floor", c.lr_floor},
            {"fdr_q", c.fdr_q},
            {"seed", c.seed}};
}

ChimericConfig chimeric_config_from_json(const nlohmann::json& j, ChimericConfig c)
{
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) {
            j.at(key).get_to(field);
        }
    };
    get("latent_dim", c.latent_dim);
    get("hidden", c.hidden);
    get("dropout", c.dropout);
    if (j.contains("hidden_activation")) {
        c.hidden_activation = activation_from_string(j.at("hidden_activation").get<std::string>());
    }
    if (j.contains("latent_activation")) {
        c.latent_activation = activation_from_string(j.at("latent_activation").get<std::string>());
    }
    get("batch_size", c.batch_size);
    get("epochs", c.epochs);
    get("learning_rate", c.learning_rate);
    get("weight_decay", c.weight_decay);
    get("w_c", c.w_c);
    get("w_cy", c.w_cy);
    get("w_o", c.w_o);
    get("plateau_factor", c.plateau_factor);
    get("plateau_patience", c.plateau_patience);
    get("lr_floor", c.lr_floor);
    get("fdr_q", c.fdr_q);
    get("seed", c.seed);
    return c;
}

ColumnScaler ColumnScaler::fit(const Matrix& x)
{
    ColumnScaler s;
    const auto n = static_cast<double>(x.rows());
    s.center = x.colwise().mean();
    s.scale = ((x.rowwise() - s.center).array().square().colwise().sum() / std::max(1.0, n - 1.0)).sqrt();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
        if (!(s.scale(j) > 0.0) || !std::isfinite(s.scale(j))) {
            s.scale(j) = 1.0;
        }
    }
    return s;
}

Matrix ColumnScaler::forward(const Matrix& x) const
{
    return (x.rowwise() - center).array().rowwise() / scale.array();
}

Matrix ColumnScaler::inverse(const Matrix& z) const
{
    return (z.array().rowwise() * scale.array()).matrix().rowwise() + center;
}

namespace {

MlpSpec encoder_spec(const ChimericConfig& c, int in)
{
    MlpSpec s;
    s.sizes.push_back(in);
    for (int h : c.hidden) {
        s.sizes.push_back(h);
        s.activations.push_back(c.hidden_activation);
        s.dropout_after.push_back(false);
    }
    // dropout after the last hidden layer
    s.dropout_after.back() = true;
    s.sizes.push_back(c.latent_dim);
    s.activations.push_back(c.latent_activation);
    s.dropout_after.push_back(false);
    s.dropout_rate = c.dropout;
    return s;
}

MlpSpec decoder_spec(const ChimericConfig& c, int out)
{
    MlpSpec s;
    s.sizes.push_back(c.latent_dim);
    for (auto it = c.hidden.rbegin(); it != c.hidden.rend(); ++it) {
        s.sizes.push_back(*it);
        s.activations.push_back(c.hidden_activation);
        s.dropout_after.push_back(false);
    }
    // dropout after the first hidden layer
    s.dropout_after.front() = true;
    s.sizes.push_back(out);
    s.activations.push_back(Activation::linear);
    s.dropout_after.push_back(false);
    s.dropout_rate = c.dropout;
    return s;
}

nlohmann::json features_json(const std::vector<FeatureMeta>& fs)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : fs) {
        arr.push_back({{"name", f.name},
                       {"kind", to_string(f.kind)},
                       {"parent", f.parent},
                       {"level", f.level},
                       {"weight", f.certainty_weight}});
    }
    return arr;
}

std::vector<FeatureMeta> features_from_json(const nlohmann::json& arr)
{
    std::vector<FeatureMeta> fs;
    for (const auto& j : arr) {
        FeatureMeta f;
        f.name = j.at("name").get<std::string>();
        const auto kind = j.at("kind").get<std::string>();
        f.kind = kind == "binary"           ? FeatureKind::binary
                 : kind == "onehot_member" ? FeatureKind::onehot_member
                                           : FeatureKind::continuous;
        f.parent = j.value("parent", "");
        f.level = j.value("level", "");
        f.certainty_weight = j.value("weight", 1.0);
        fs.push_back(std::move(f));
    }
    return fs;
}

nlohmann::json scaler_json(const ColumnScaler& s)
{
    return {{"center", std::vector<double>(s.center.data(), s.center.data() + s.center.size())},
            {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
}

ColumnScaler scaler_from_json(const nlohmann::json& j, std::size_t p)
{
    const auto c = j.at("center").get<std::vector<double>>();
    const auto s = j.at("scale").get<std::vector<double>>();
    if (c.size() != p || s.size() != p) {
        throw Error("chimeric checkpoint: scaler width does not match features");
    }
    ColumnScaler out;
    out.center = Eigen::Map<const RowVector>(c.data(), static_cast<Eigen::Index>(p));
    out.scale = Eigen::Map<const RowVector>(s.data(), static_cast<Eigen::Index>(p));
    return out;
}

// mean over all entries of (pred - target)^2, with per-column weights
double weighted_mse(const Matrix& pred, const Matrix& target, const RowVector& w, Matrix& grad, double weight)
{
    const Matrix diff = pred - target;
    const double denom = static_cast<double>(diff.size());
    const double loss = (diff.array().square().rowwise() * w.array()).sum() / denom;
    grad = (2.0 * weight / denom) * (diff.array().rowwise() * w.array()).matrix();
    return loss;
}

double ortho_loss(const Matrix& h, Matrix& grad, double weight)
{
    const double b = static_cast<double>(h.rows());
    Matrix d = h.transpose() * h / b;
    d.diagonal().array() -= 1.0;
    const double norm = d.norm();
    if (norm > 0.0 && weight > 0.0) {
        grad = (2.0 * weight / (b * norm)) * (h * d);
    } else {
        grad = Matrix::Zero(h.rows(), h.cols());
    }
    return norm;
}

struct SideResult {
    double ae = 0.0;
    double ce = 0.0;
    double cy = 0.0;
    double ortho = 0.0;
};

// Losses driven by one dataset's batch x, with `self` = (f, g) of that
// dataset and `other` = (f, g) of the other one. Gradients accumulate.
SideResult side_pass(const Mlp& f_self, const Mlp& g_self, const Mlp& f_other, const Mlp& g_other,
                     const Matrix& x, std::size_t k, const Vector& weights, const ChimericConfig& cfg, Rng* rng,
                     Gradients& gf_self, Gradients& gg_self, Gradients& gf_other, Gradients& gg_other)
{
    SideResult r;
    const auto p = x.cols();
    const auto kk = static_cast<Eigen::Index>(k);

    const ForwardCache c_enc = f_self.forward(x, rng);
    const Matrix& h = c_enc.output();
    const ForwardCache c_rec = g_self.forward(h, rng);
    const ForwardCache c_chi = g_other.forward(h, rng);
    const ForwardCache c_enc2 = f_other.forward(c_chi.output(), rng);
    const ForwardCache c_cyc = g_self.forward(c_enc2.output(), rng);

    // reconstruction
    Matrix d_rec;
    r.ae = weighted_mse(c_rec.output(), x, RowVector::Ones(p), d_rec, 1.0);

    // cross reconstruction on the known-mapped columns only
    Matrix d_chi = Matrix::Zero(c_chi.output().rows(), c_chi.output().cols());
    {
        Matrix d_k;
        r.ce = weighted_mse(c_chi.output().leftCols(kk), x.leftCols(kk), weights.transpose(), d_k, cfg.w_c);
        d_chi.leftCols(kk) = d_k;
    }

    // cycle
    Matrix d_cyc;
    r.cy = weighted_mse(c_cyc.output(), x, RowVector::Ones(p), d_cyc, cfg.w_cy);

    Matrix d_h;
    r.ortho = ortho_loss(h, d_h, cfg.w_o);

    Matrix d_in;
    gg_self += g_self.backward(c_cyc, d_cyc, &d_in);
    gf_other += f_other.backward(c_enc2, d_in, &d_in);
    d_chi += d_in;
    gg_other += g_other.backward(c_chi, d_chi, &d_in);
    d_h += d_in;
    gg_self += g_self.backward(c_rec, d_rec, &d_in);
    d_h += d_in;
    gf_self += f_self.backward(c_enc, d_h);
    return r;
}

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& order, std::size_t start, std::size_t count)
{
    Matrix out(static_cast<Eigen::Index>(count), x.cols());
    for (std::size_t i = 0; i < count; ++i) {
        out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[start + i]));
    }
    return out;
}

// Cycles through shuffled row orders, reshuffling on exhaustion.
class BatchStream {
public:
    BatchStream(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed)
    {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::shuffle(order_.begin(), order_.end(), rng_);
    }

    Matrix next(const Matrix& x, std::size_t batch)
    {
        const std::size_t b = std::min(batch, order_.size());
        if (pos_ + b > order_.size()) {
            std::shuffle(order_.begin(), order_.end(), rng_);
            pos_ = 0;
        }
        Matrix out = gather_rows(x, order_, pos_, b);
        pos_ += b;
        return out;
    }

private:
    std::vector<std::size_t> order_;
    Rng rng_;
    std::size_t pos_ = 0;
};

} // namespace

BatchLoss chimeric_batch_loss(const Mlp& f_a, const Mlp& g_a, const Mlp& f_b, const Mlp& g_b, const Matrix& x_a,
                              const Matrix& x_b, std::size_t mapped_count, const Vector& weights_a,
                              const Vector& weights_b, const ChimericConfig& cfg, Rng* rng)
{
    BatchLoss out;
    out.f_a = f_a.zero_gradients();
    out.g_a = g_a.zero_gradients();
    out.f_b = f_b.zero_gradients();
    out.g_b = g_b.zero_gradients();
    const auto ra =
        side_pass(f_a, g_a, f_b, g_b, x_a, mapped_count, weights_a, cfg, rng, out.f_a, out.g_a, out.f_b, out.g_b);
    const auto rb =
        side_pass(f_b, g_b, f_a, g_a, x_b, mapped_count, weights_b, cfg, rng, out.f_b, out.g_b, out.f_a, out.g_a);
    auto& l = out.loss;
    l.ae_a = ra.ae;
    l.ae_b = rb.ae;
    l.ce_a = ra.ce;
    l.ce_b = rb.ce;
    l.cy_a = ra.cy;
    l.cy_b = rb.cy;
    l.ortho_a = ra.ortho;
    l.ortho_b = rb.ortho;
    l.total = (ra.ae + rb.ae) + cfg.w_c * (ra.ce + rb.ce) + cfg.w_cy * (ra.cy + rb.cy)
              + cfg.w_o * (ra.ortho + rb.ortho);
    return out;
}

ChimericModel::ChimericModel(const ChimericConfig& cfg, std::vector<FeatureMeta> features_a,
                             std::vector<FeatureMeta> features_b, std::size_t mapped_count)
    : cfg_(cfg), features_a_(std::move(features_a)), features_b_(std::move(features_b)), mapped_count_(mapped_count)
{
    cfg_.validate(features_a_.size(), features_b_.size());
    const int pa = static_cast<int>(features_a_.size());
    const int pb = static_cast<int>(features_b_.size());
    Rng rng_fa(derive_seed(cfg_.seed, 101));
    Rng rng_ga(derive_seed(cfg_.seed, 102));
    Rng rng_fb(derive_seed(cfg_.seed, 103));
    Rng rng_gb(derive_seed(cfg_.seed, 104));
    f_a_ = Mlp(encoder_spec(cfg_, pa), rng_fa);
    g_a_ = Mlp(decoder_spec(cfg_, pa), rng_ga);
    f_b_ = Mlp(encoder_spec(cfg_, pb), rng_fb);
    g_b_ = Mlp(decoder_spec(cfg_, pb), rng_gb);
    if (f_a_.out() != f_b_.out()) {
        throw Error("chimeric: encoder output dimensions differ");
    }
}

Matrix ChimericModel::translate(const Matrix& x, TranslateDirection dir) const
{
    const bool ab = dir == TranslateDirection::a_to_b;
    const auto& src_feats = ab ? features_a_ : features_b_;
    if (x.cols() != static_cast<Eigen::Index>(src_feats.size())) {
        throw Error("translate: input has " + std::to_string(x.cols()) + " columns, expected "
                    + std::to_string(src_feats.size()));
    }
    const auto& src_scale = ab ? scale_a_ : scale_b_;
    const auto& dst_scale = ab ? scale_b_ : scale_a_;
    const Mlp& enc = ab ? f_a_ : f_b_;
    const Mlp& dec = ab ? g_b_ : g_a_;
    return dst_scale.inverse(dec.predict(enc.predict(src_scale.forward(x))));
}

Dataset ChimericModel::translate(const Dataset& ds, TranslateDirection dir) const
{
    const bool ab = dir == TranslateDirection::a_to_b;
    // columns are looked up by name so any column order is accepted
    const auto& in = ab ? features_a_ : features_b_;
    Matrix x(static_cast<Eigen::Index>(ds.rows()), static_cast<Eigen::Index>(in.size()));
    for (std::size_t j = 0; j < in.size(); ++j) {
        x.col(static_cast<Eigen::Index>(j)) = ds.column(in[j].name);
    }
    Matrix z = translate(x, dir);
    auto feats = ab ? features_b_ : features_a_;
    for (auto& f : feats) {
        f.imputed_rows.clear();
    }
    return Dataset(ds.name() + (ab ? "->B" : "->A"), std::move(z), std::move(feats), mapped_count_);
}

Matrix ChimericModel::reconstruct(const Matrix& x, TranslateDirection from) const
{
    const bool a = from == TranslateDirection::a_to_b;
    const auto& sc = a ? scale_a_ : scale_b_;
    const Mlp& enc = a ? f_a_ : f_b_;
    const Mlp& dec = a ? g_a_ : g_b_;
    if (x.cols() != enc.in()) {
        throw Error("reconstruct: column count mismatch");
    }
    return sc.inverse(dec.predict(enc.predict(sc.forward(x))));
}

ChimericModel train_chimeric(const Dataset& a, const Dataset& b, const ChimericConfig& cfg)
{
    const std::size_t k = a.mapped_count();
    if (k == 0) {
        throw Error("train_chimeric: need at least one known-mapped feature");
    }
    if (b.mapped_count() != k) {
        throw Error("train_chimeric: mapped counts differ (" + std::to_string(k) + " vs "
                    + std::to_string(b.mapped_count()) + ")");
    }
    if (a.has_missing() || b.has_missing()) {
        throw Error("train_chimeric: impute missing values first");
    }
    ChimericModel model(cfg, a.features(), b.features(), k);
    model.scale_a_ = ColumnScaler::fit(a.values());
    model.scale_b_ = ColumnScaler::fit(b.values());
    const Matrix xa = model.scale_a_.forward(a.values());
    const Matrix xb = model.scale_b_.forward(b.values());
    const Vector wa = a.mapped_weights();
    const Vector wb = b.mapped_weights();

    AdamState opt_fa(model.f_a_, cfg.learning_rate, cfg.weight_decay);
    AdamState opt_ga(model.g_a_, cfg.learning_rate, cfg.weight_decay);
    AdamState opt_fb(model.f_b_, cfg.learning_rate, cfg.weight_decay);
    AdamState opt_gb(model.g_b_, cfg.learning_rate, cfg.weight_decay);
    PlateauSchedule schedule(cfg.plateau_factor, cfg.plateau_patience, cfg.lr_floor);
    double lr = cfg.learning_rate;

    BatchStream stream_a(a.rows(), derive_seed(cfg.seed, 201));
    BatchStream stream_b(b.rows(), derive_seed(cfg.seed, 202));
    Rng dropout_rng(derive_seed(cfg.seed, 203));
    const std::size_t steps = (std::max(a.rows(), b.rows()) + cfg.batch_size - 1) / cfg.batch_size;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochLoss acc;
        for (std::size_t s = 0; s < steps; ++s) {
            const Matrix ba = stream_a.next(xa, cfg.batch_size);
            const Matrix bb = stream_b.next(xb, cfg.batch_size);
            auto step = chimeric_batch_loss(model.f_a_, model.g_a_, model.f_b_, model.g_b_, ba, bb, k, wa, wb, cfg,
                                            &dropout_rng);
            if (!std::isfinite(step.loss.total)) {
                throw Error("train_chimeric: loss diverged at epoch " + std::to_string(epoch + 1) + ", step "
                            + std::to_string(s + 1) + " (try a lower learning rate)");
            }
            // theta_A then theta_B, both from the same pass
            adam_step(model.f_a_, step.f_a, opt_fa);
            adam_step(model.g_a_, step.g_a, opt_ga);
            adam_step(model.f_b_, step.f_b, opt_fb);
            adam_step(model.g_b_, step.g_b, opt_gb);
            const auto& l = step.loss;
            acc.ae_a += l.ae_a;
            acc.ae_b += l.ae_b;
            acc.ce_a += l.ce_a;
            acc.ce_b += l.ce_b;
            acc.cy_a += l.cy_a;
            acc.cy_b += l.cy_b;
            acc.ortho_a += l.ortho_a;
            acc.ortho_b += l.ortho_b;
            acc.total += l.total;
        }
        const double inv = 1.0 / static_cast<double>(steps);
        for (double* v : {&acc.ae_a, &acc.ae_b, &acc.ce_a, &acc.ce_b, &acc.cy_a, &acc.cy_b, &acc.ortho_a,
                          &acc.ortho_b, &acc.total}) {
            *v *= inv;
        }
        acc.lr = lr;
        model.trace_.push_back(acc);
        log::debug("chimeric: epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(acc.total));
        lr = schedule.update(acc.total, lr);
        for (AdamState* st : {&opt_fa, &opt_ga, &opt_fb, &opt_gb}) {
            st->lr = lr;
        }
    }
    model.trained_ = true;
    return model;
}

nlohmann::json ChimericModel::to_json() const
{
    return {{"config", chimatch::to_json(cfg_)},
            {"mapped_count", mapped_count_},
            {"features_a", features_json(features_a_)},
            {"features_b", features_json(features_b_)},
            {"scale_a", scaler_json(scale_a_)},
            {"scale_b", scaler_json(scale_b_)},
            {"f_a", chimatch::to_json(f_a_)},
            {"g_a", chimatch::to_json(g_a_)},
            {"f_b", chimatch::to_json(f_b_)},
            {"g_b", chimatch::to_json(g_b_)}};
}

ChimericModel ChimericModel::from_json(const nlohmann::json& j)
{
    ChimericModel m;
    m.cfg_ = chimeric_config_from_json(j.at("config"));
    m.mapped_count_ = j.at("mapped_count").get<std::size_t>();
    m.features_a_ = features_from_json(j.at("features_a"));
    m.features_b_ = features_from_json(j.at("features_b"));
    m.scale_a_ = scaler_from_json(j.at("scale_a"), m.features_a_.size());
    m.scale_b_ = scaler_from_json(j.at("scale_b"), m.features_b_.size());
    m.f_a_ = mlp_from_json(j.at("f_a"));
    m.g_a_ = mlp_from_json(j.at("g_a"));
    m.f_b_ = mlp_from_json(j.at("f_b"));
    m.g_b_ = mlp_from_json(j.at("g_b"));
    const auto pa = static_cast<Eigen::Index>(m.features_a_.size());
    const auto pb = static_cast<Eigen::Index>(m.features_b_.size());
    if (m.f_a_.in() != pa || m.g_a_.out() != pa || m.f_b_.in() != pb || m.g_b_.out() != pb
        || m.f_a_.out() != m.f_b_.out() || m.g_a_.in() != m.f_a_.out() || m.g_b_.in() != m.f_b_.out()) {
        throw Error("chimeric checkpoint: network shapes are inconsistent");
    }
    m.trained_ = true;
    return m;
}

SimilarityMatrix chimeric_dependence(const Dataset& ds, const Dataset& z, DependenceMeasure measure, int bins)
{
    if (ds.rows() != z.rows()) {
        throw Error("chimeric_dependence: row counts differ (" + std::to_string(ds.rows()) + " vs "
                    + std::to_string(z.rows()) + ")");
    }
    SimilarityMatrix s;
    s.row_label = ds.name();
    s.col_label = z.name();
    s.row_ids = ds.feature_names();
    s.col_ids = z.feature_names();
    if (measure == DependenceMeasure::pearson) {
        auto c = correlate_columns(ds.values(), z.values());
        s.values = std::move(c.values);
        s.degenerate = std::move(c.degenerate);
        s.mode = SimilarityMode::pearson;
        return s;
    }
    s.mode = SimilarityMode::mutual_information;
    const auto p = static_cast<Eigen::Index>(ds.cols());
    const auto q = static_cast<Eigen::Index>(z.cols());
    std::vector<std::vector<int>> cx;
    std::vector<std::vector<int>> cz;
    std::vector<bool> const_x;
    std::vector<bool> const_z;
    auto is_const = [](const std::vector<int>& c) {
        return std::all_of(c.begin(), c.end(), [&](int v) { return v == c.front(); });
    };
    for (Eigen::Index i = 0; i < p; ++i) {
        cx.push_back(discretize(ds.values().col(i), bins));
        const_x.push_back(is_const(cx.back()));
    }
    for (Eigen::Index j = 0; j < q; ++j) {
        cz.push_back(discretize(z.values().col(j), bins));
        const_z.push_back(is_const(cz.back()));
    }
    s.values = Matrix::Zero(p, q);
    s.degenerate = BoolMatrix::Constant(p, q, false);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < q; ++j) {
            if (const_x[static_cast<std::size_t>(i)] || const_z[static_cast<std::size_t>(j)]) {
                s.degenerate(i, j) = true;
                continue;
            }
            s.values(i, j) = mutual_information_codes(cx[static_cast<std::size_t>(i)], cz[static_cast<std::size_t>(j)]);
        }
    }
    return s;
}

Vector reconstruct_unshared(const ChimericModel& model, const Dataset& a, const std::string& feature_b)
{
    const auto& fb = model.features_b();
    auto it = std::find_if(fb.begin(), fb.end(), [&](const FeatureMeta& f) { return f.name == feature_b; });
    if (it == fb.end()) {
        throw Error("reconstruct_unshared: unknown feature '" + feature_b + "'");
    }
    const Dataset z = model.translate(a, TranslateDirection::a_to_b);
    return z.values().col(it - fb.begin());
}

void write_loss_trace(std::ostream& os, const std::vector<EpochLoss>& trace)
{
    os << "epoch,component,value\n";
    for (std::size_t e = 0; e < trace.size(); ++e) {
        const auto& l = trace[e];
        const std::pair<const char*, double> rows[] = {
            {"AE_A", l.ae_a}, {"AE_B", l.ae_b}, {"CE_A", l.ce_a},       {"CE_B", l.ce_b},   {"CY_A", l.cy_a},
            {"CY_B", l.cy_b}, {"ortho_A", l.ortho_a}, {"ortho_B", l.ortho_b}, {"total", l.total}, {"lr", l.lr}};
        for (const auto& [name, v] : rows) {
            os << e + 1 << ',' << name << ',' << v << '\n';
        }
    }
}

} // namespace chimatch
