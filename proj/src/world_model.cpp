#include "novelgrid/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "novelgrid/errors.hpp"

namespace novelgrid::model {

namespace {

constexpr double kBeliefFloor = std::numeric_limits<double>::min();

void normalize_with_floor(std::vector<double>& probs) {
    double sum = 0.0;
    for (double p : probs) sum += p;
    for (double& p : probs) p = std::max(p / sum, kBeliefFloor);
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

constexpr std::uint32_t kCheckpointMagic = 0x4E47574DU;  // "NGWM"
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

int WorldModel::find_or_add_code(const Observation& x) {
    if (params_.match_radius > 0.0) {
        for (int k = 0; k < code_count(); ++k)
            if (detect::mare(x, code_images_[k]) <= params_.match_radius) return k;
        code_images_.push_back(x);
        marginal_.push_back(0);
        return code_count() - 1;
    }
    const std::uint64_t h = observation_hash(x);
    auto& bucket = code_by_hash_[h];
    for (int k : bucket)
        if (code_images_[k] == x) return k;
    code_images_.push_back(x);
    marginal_.push_back(0);
    bucket.push_back(code_count() - 1);
    return code_count() - 1;
}

WorldModel WorldModel::train(std::span<const TrainingEpisode> buffer, const ModelParams& params) {
    if (buffer.empty()) throw CalibrationError("train: empty buffer");
    WorldModel m;
    m.params_ = params;
    m.obs_width_ = buffer.front().observations.front().width;
    m.obs_height_ = buffer.front().observations.front().height;

    for (const TrainingEpisode& ep : buffer) {
        if (ep.observations.empty()) throw CalibrationError("train: episode without observations");
        if (ep.actions.size() + 1 != ep.observations.size())
            throw std::invalid_argument("train: episode needs one action per non-final step");
        RecurrentContext h = RecurrentContext::null_context();
        for (std::size_t t = 0; t < ep.observations.size(); ++t) {
            const Observation& x = ep.observations[t];
            if (x.width != m.obs_width_ || x.height != m.obs_height_)
                throw std::invalid_argument("train: observation shape mismatch across buffer");
            const int code = m.find_or_add_code(x);
            TransitionRow& row = m.transitions_[h.key()];
            row.counts[code] += 1;
            row.total += 1;
            m.marginal_[code] += 1;
            m.marginal_total_ += 1;
            if (t < ep.actions.size()) h = m.recurrent_update(h, code, ep.actions[t]);
        }
    }
    return m;
}

std::optional<int> WorldModel::exact_code(const Observation& x) const {
    auto it = code_by_hash_.find(observation_hash(x));
    if (it == code_by_hash_.end()) return std::nullopt;
    for (int k : it->second)
        if (code_images_[k] == x) return k;
    return std::nullopt;
}

const std::vector<double>& WorldModel::likelihood_exponents(const Observation& x) const {
    const std::uint64_t h = observation_hash(x);
    std::lock_guard<std::mutex> lock(cache_->mutex);
    auto it = cache_->rows.find(h);
    if (it == cache_->rows.end()) {
        auto row = std::make_shared<std::vector<double>>(code_images_.size());
        for (std::size_t k = 0; k < code_images_.size(); ++k)
            (*row)[k] = -detect::mare(x, code_images_[k]) / params_.tau;
        it = cache_->rows.emplace(h, std::move(row)).first;
    }
    return *it->second;
}

std::vector<double> WorldModel::log_prior_vector(const RecurrentContext& h) const {
    const int k = code_count();
    std::vector<double> out(static_cast<std::size_t>(k));
    const auto it = transitions_.find(h.key());
    const double alpha = params_.alpha;
    if (it == transitions_.end() || it->second.total == 0) {
        const double u = -std::log(static_cast<double>(k));
        std::fill(out.begin(), out.end(), u);
        return out;
    }
    const double denom = static_cast<double>(it->second.total) + alpha * k;
    const double log_alpha = std::log(alpha / denom);
    std::fill(out.begin(), out.end(), log_alpha);
    for (const auto& [code, count] : it->second.counts)
        out[code] = std::log((static_cast<double>(count) + alpha) / denom);
    return out;
}

std::vector<double> WorldModel::log_marginal_vector() const {
    const int k = code_count();
    std::vector<double> out(static_cast<std::size_t>(k));
    const double denom = static_cast<double>(marginal_total_) + params_.alpha * k;
    for (int i = 0; i < k; ++i)
        out[i] = std::log((static_cast<double>(marginal_[i]) + params_.alpha) / denom);
    return out;
}

CategoricalBelief WorldModel::posterior_from(const std::vector<double>& log_prior, const Observation& x) const {
    if (x.width != obs_width_ || x.height != obs_height_)
        throw std::invalid_argument("represent: observation shape mismatch");
    const std::vector<double>& expo = likelihood_exponents(x);
    std::vector<double> logits(expo.size());
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < expo.size(); ++i) {
        logits[i] = expo[i] + log_prior[i];
        max_logit = std::max(max_logit, logits[i]);
    }
    for (double& v : logits) v = std::exp(v - max_logit);
    normalize_with_floor(logits);
    return CategoricalBelief::single(std::move(logits));
}

CategoricalBelief WorldModel::represent(const RecurrentContext& h, const Observation& x) const {
    return posterior_from(log_prior_vector(h), x);
}

CategoricalBelief WorldModel::represent_h0(const Observation& x) const {
    return posterior_from(log_marginal_vector(), x);
}

CategoricalBelief WorldModel::prior(const RecurrentContext& h) const {
    std::vector<double> v = log_prior_vector(h);
    for (double& p : v) p = std::exp(p);
    normalize_with_floor(v);
    return CategoricalBelief::single(std::move(v));
}

CategoricalBelief WorldModel::prior_h0() const {
    std::vector<double> v = log_marginal_vector();
    for (double& p : v) p = std::exp(p);
    normalize_with_floor(v);
    return CategoricalBelief::single(std::move(v));
}

Observation WorldModel::decode(const RecurrentContext&, const CategoricalBelief& belief) const {
    const auto& probs = belief.factors.at(0);
    if (probs.size() != code_images_.size()) throw std::invalid_argument("decode: belief size mismatch");
    Observation out;
    out.width = obs_width_;
    out.height = obs_height_;
    out.data.assign(static_cast<std::size_t>(obs_width_) * obs_height_ * 3, 0.0f);
    std::vector<double> acc(out.data.size(), 0.0);
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (probs[k] == 0.0) continue;
        if (probs[k] == 1.0) return code_images_[k];
        const auto& img = code_images_[k].data;
        for (std::size_t i = 0; i < img.size(); ++i) acc[i] += probs[k] * img[i];
    }
    for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i]);
    return out;
}

Observation WorldModel::decode_code(int code) const { return code_images_.at(code); }

int WorldModel::sample(const CategoricalBelief& belief, SplitMix64& rng) const {
    const auto& probs = belief.factors.at(0);
    const double u = rng.next_double();
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

CategoricalBelief WorldModel::one_hot(int code) const {
    std::vector<double> v(code_images_.size(), 0.0);
    v.at(code) = 1.0;
    return CategoricalBelief::single(std::move(v));
}

RecurrentContext WorldModel::recurrent_update(const RecurrentContext& h, int code, int action) const {
    RecurrentContext out = h;
    out.is_null = false;
    out.history.emplace_back(static_cast<std::int32_t>(code), static_cast<std::int8_t>(action));
    while (out.history.size() > static_cast<std::size_t>(params_.context_length)) out.history.erase(out.history.begin());
    return out;
}

double WorldModel::surprise(const RecurrentContext& h, const Observation& x) const {
    return detect::kl_divergence(represent(h, x), prior(h));
}

void WorldModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    write_pod(out, kCheckpointMagic);
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<std::int32_t>(obs_width_));
    write_pod(out, static_cast<std::int32_t>(obs_height_));
    write_pod(out, params_.alpha);
    write_pod(out, params_.tau);
    write_pod(out, params_.match_radius);
    write_pod(out, static_cast<std::int32_t>(params_.context_length));
    write_pod(out, static_cast<std::int32_t>(params_.factors));
    write_pod(out, static_cast<std::int32_t>(code_count()));
    for (const Observation& img : code_images_)
        out.write(reinterpret_cast<const char*>(img.data.data()),
                  static_cast<std::streamsize>(img.data.size() * sizeof(float)));
    for (std::int64_t c : marginal_) write_pod(out, c);
    write_pod(out, static_cast<std::int64_t>(transitions_.size()));
    for (const auto& [key, row] : transitions_) {
        write_pod(out, static_cast<std::int32_t>(key.size()));
        for (std::int32_t v : key) write_pod(out, v);
        write_pod(out, static_cast<std::int32_t>(row.counts.size()));
        for (const auto& [code, count] : row.counts) {
            write_pod(out, code);
            write_pod(out, count);
        }
    }
    if (!out) throw IoError("checkpoint write failed: " + path);
}

WorldModel WorldModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    if (read_pod<std::uint32_t>(in) != kCheckpointMagic) throw IoError("not a model checkpoint: " + path);
    if (read_pod<std::uint32_t>(in) != kCheckpointVersion) throw IoError("unsupported checkpoint version: " + path);
    WorldModel m;
    m.obs_width_ = read_pod<std::int32_t>(in);
    m.obs_height_ = read_pod<std::int32_t>(in);
    m.params_.alpha = read_pod<double>(in);
    m.params_.tau = read_pod<double>(in);
    m.params_.match_radius = read_pod<double>(in);
    m.params_.context_length = read_pod<std::int32_t>(in);
    m.params_.factors = read_pod<std::int32_t>(in);
    const int k = read_pod<std::int32_t>(in);
    const std::size_t pixels = static_cast<std::size_t>(m.obs_width_) * m.obs_height_ * 3;
    m.code_images_.resize(k);
    for (int i = 0; i < k; ++i) {
        Observation& img = m.code_images_[i];
        img.width = m.obs_width_;
        img.height = m.obs_height_;
        img.data.resize(pixels);
        in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(pixels * sizeof(float)));
        m.code_by_hash_[observation_hash(img)].push_back(i);
    }
    m.marginal_.resize(k);
    m.marginal_total_ = 0;
    for (int i = 0; i < k; ++i) {
        m.marginal_[i] = read_pod<std::int64_t>(in);
        m.marginal_total_ += m.marginal_[i];
    }
    const std::int64_t rows = read_pod<std::int64_t>(in);
    for (std::int64_t r = 0; r < rows; ++r) {
        const int keylen = read_pod<std::int32_t>(in);
        std::vector<std::int32_t> key(static_cast<std::size_t>(keylen));
        for (auto& v : key) v = read_pod<std::int32_t>(in);
        TransitionRow row;
        const int entries = read_pod<std::int32_t>(in);
        for (int e = 0; e < entries; ++e) {
            const std::int32_t code = read_pod<std::int32_t>(in);
            const std::int64_t count = read_pod<std::int64_t>(in);
            row.counts[code] = count;
            row.total += count;
        }
        m.transitions_.emplace(std::move(key), std::move(row));
    }
    if (!in) throw IoError("checkpoint truncated: " + path);
    return m;
}

bool operator==(const WorldModel& a, const WorldModel& b) {
    return a.obs_width_ == b.obs_width_ && a.obs_height_ == b.obs_height_ &&
           a.params_.alpha == b.params_.alpha && a.params_.tau == b.params_.tau &&
           a.params_.match_radius == b.params_.match_radius &&
           a.params_.context_length == b.params_.context_length && a.params_.factors == b.params_.factors &&
           a.code_images_ == b.code_images_ && a.marginal_ == b.marginal_ && a.transitions_ == b.transitions_;
}

}  // namespace novelgrid::model
