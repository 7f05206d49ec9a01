// Encoder-decoder LSTM for sequence regression, with exact backpropagation
// through time. Parameters are plain Eigen matrices; batches are stored
// column-wise (one sample per column) so gate math is a handful of GEMMs.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "diskrul/common.hpp"
#include <json.hpp>

namespace diskrul {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
Mat<Scalar> sigmoid(const Mat<Scalar>& a) {
    return (Scalar(1) / (Scalar(1) + (-a.array()).exp())).matrix();
}

// One LSTM layer. W_* act on the previous hidden state, U_* on the layer
// input, b_* are biases kept as H x 1 matrices so every tensor has one type.
template <class Scalar>
struct LSTMCellParams {
    Mat<Scalar> W_f, U_f, b_f;
    Mat<Scalar> W_i, U_i, b_i;
    Mat<Scalar> W_c, U_c, b_c;
    Mat<Scalar> W_o, U_o, b_o;

    void build(int hidden, int input) {
        if (hidden <= 0 || input <= 0)
            throw DomainError("lstm cell needs positive dimensions");
        auto zero_gate = [&](Mat<Scalar>& W, Mat<Scalar>& U, Mat<Scalar>& b) {
            W = Mat<Scalar>::Zero(hidden, hidden);
            U = Mat<Scalar>::Zero(hidden, input);
            b = Mat<Scalar>::Zero(hidden, 1);
        };
        zero_gate(W_f, U_f, b_f);
        zero_gate(W_i, U_i, b_i);
        zero_gate(W_c, U_c, b_c);
        zero_gate(W_o, U_o, b_o);
    }

    // Uniform(-k, k) with k = 1/sqrt(fan_in). The forget bias starts at 1 so
    // the cell state carries across long windows from the first epoch; with
    // all-zero biases the forget gate opens at 0.5 and the state-chain
    // gradient decays as 0.5^T, which stalls training at T = 25. Other biases
    // stay zero.
    void init_params(Rng& rng) {
        auto fill = [&](Mat<Scalar>& m, Eigen::Index fan_in) {
            const double k = 1.0 / std::sqrt(double(fan_in));
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                for (Eigen::Index r = 0; r < m.rows(); ++r)
                    m(r, c) = Scalar(rng.uniform(-k, k));
        };
        fill(W_f, W_f.cols());
        fill(U_f, U_f.cols());
        fill(W_i, W_i.cols());
        fill(U_i, U_i.cols());
        fill(W_c, W_c.cols());
        fill(U_c, U_c.cols());
        fill(W_o, W_o.cols());
        fill(U_o, U_o.cols());
        b_f.setConstant(Scalar(1));
    }

    int hidden() const { return int(W_f.rows()); }
    int input() const { return int(U_f.cols()); }

    std::size_t param_count() const {
        return 4 * std::size_t(W_f.size() + U_f.size() + b_f.size());
    }

    template <class V>
    void visit(V&& v) {
        v(W_f); v(U_f); v(b_f);
        v(W_i); v(U_i); v(b_i);
        v(W_c); v(U_c); v(b_c);
        v(W_o); v(U_o); v(b_o);
    }
    template <class V>
    void visit(V&& v) const {
        v(W_f); v(U_f); v(b_f);
        v(W_i); v(U_i); v(b_i);
        v(W_c); v(U_c); v(b_c);
        v(W_o); v(U_o); v(b_o);
    }
};

// Everything the backward pass needs about one timestep.
template <class Scalar>
struct LSTMCellState {
    Mat<Scalar> f, i, o, c_bar, c, tanh_c, h;
};

template <class Scalar>
void lstm_cell_step(const LSTMCellParams<Scalar>& p, const Mat<Scalar>& x,
                    const Mat<Scalar>& h_prev, const Mat<Scalar>& c_prev,
                    LSTMCellState<Scalar>& st) {
    const Eigen::Index H = p.W_f.rows();
    const Eigen::Index B = x.cols();
    if (x.rows() != p.U_f.cols())
        throw DomainError("lstm input has " + std::to_string(x.rows()) +
                          " features, cell expects " + std::to_string(p.U_f.cols()));
    if (h_prev.rows() != H || h_prev.cols() != B || c_prev.rows() != H || c_prev.cols() != B)
        throw DomainError("lstm state shape does not match cell/batch");
    if (!x.allFinite() || !h_prev.allFinite() || !c_prev.allFinite())
        throw NumericError("non-finite values entering lstm cell");

    auto gate = [&](const Mat<Scalar>& W, const Mat<Scalar>& U, const Mat<Scalar>& b) {
        Mat<Scalar> a = W * h_prev + U * x;
        a.colwise() += b.col(0);
        return a;
    };
    st.f = sigmoid<Scalar>(gate(p.W_f, p.U_f, p.b_f));
    st.i = sigmoid<Scalar>(gate(p.W_i, p.U_i, p.b_i));
    st.o = sigmoid<Scalar>(gate(p.W_o, p.U_o, p.b_o));
    st.c_bar = gate(p.W_c, p.U_c, p.b_c).array().tanh().matrix();
    st.c = st.f.cwiseProduct(c_prev) + st.i.cwiseProduct(st.c_bar);
    st.tanh_c = st.c.array().tanh().matrix();
    st.h = st.o.cwiseProduct(st.tanh_c);
}

// dh is dL/dh_t from above and from t+1; dc carries dL/dc_{t+1}*f_{t+1} in and
// leaves as dL/dc_{t-1}'s cell-path term. Gradients accumulate into grad.
template <class Scalar>
void lstm_cell_backward(const LSTMCellParams<Scalar>& p, const Mat<Scalar>& x,
                        const Mat<Scalar>& h_prev, const Mat<Scalar>& c_prev,
                        const LSTMCellState<Scalar>& st, const Mat<Scalar>& dh,
                        Mat<Scalar>& dc, LSTMCellParams<Scalar>& grad,
                        Mat<Scalar>& dh_prev, Mat<Scalar>* dx) {
    const Mat<Scalar> do_ = dh.cwiseProduct(st.tanh_c);
    dc += dh.cwiseProduct(st.o).cwiseProduct(
        (Scalar(1) - st.tanh_c.array().square()).matrix());

    const Mat<Scalar> df = dc.cwiseProduct(c_prev);
    const Mat<Scalar> di = dc.cwiseProduct(st.c_bar);
    const Mat<Scalar> dcb = dc.cwiseProduct(st.i);
    const Mat<Scalar> dc_prev = dc.cwiseProduct(st.f);

    const Mat<Scalar> da_f =
        df.cwiseProduct(st.f).cwiseProduct((Scalar(1) - st.f.array()).matrix());
    const Mat<Scalar> da_i =
        di.cwiseProduct(st.i).cwiseProduct((Scalar(1) - st.i.array()).matrix());
    const Mat<Scalar> da_o =
        do_.cwiseProduct(st.o).cwiseProduct((Scalar(1) - st.o.array()).matrix());
    const Mat<Scalar> da_c =
        dcb.cwiseProduct((Scalar(1) - st.c_bar.array().square()).matrix());

    auto accumulate = [&](const Mat<Scalar>& da, Mat<Scalar>& gW, Mat<Scalar>& gU,
                          Mat<Scalar>& gb) {
        gW.noalias() += da * h_prev.transpose();
        gU.noalias() += da * x.transpose();
        gb.col(0) += da.rowwise().sum();
    };
    accumulate(da_f, grad.W_f, grad.U_f, grad.b_f);
    accumulate(da_i, grad.W_i, grad.U_i, grad.b_i);
    accumulate(da_c, grad.W_c, grad.U_c, grad.b_c);
    accumulate(da_o, grad.W_o, grad.U_o, grad.b_o);

    dh_prev.noalias() = p.W_f.transpose() * da_f;
    dh_prev.noalias() += p.W_i.transpose() * da_i;
    dh_prev.noalias() += p.W_c.transpose() * da_c;
    dh_prev.noalias() += p.W_o.transpose() * da_o;
    if (dx) {
        dx->noalias() = p.U_f.transpose() * da_f;
        dx->noalias() += p.U_i.transpose() * da_i;
        dx->noalias() += p.U_c.transpose() * da_c;
        dx->noalias() += p.U_o.transpose() * da_o;
    }
    dc = dc_prev;
}

template <class Scalar>
struct DenseLayer {
    Mat<Scalar> W;  // out x in
    Mat<Scalar> b;  // out x 1

    void build(int out, int in) {
        W = Mat<Scalar>::Zero(out, in);
        b = Mat<Scalar>::Zero(out, 1);
    }
    void init_params(Rng& rng) {
        const double k = 1.0 / std::sqrt(double(W.cols()));
        for (Eigen::Index c = 0; c < W.cols(); ++c)
            for (Eigen::Index r = 0; r < W.rows(); ++r)
                W(r, c) = Scalar(rng.uniform(-k, k));
    }
    std::size_t param_count() const { return std::size_t(W.size() + b.size()); }
    template <class V>
    void visit(V&& v) { v(W); v(b); }
    template <class V>
    void visit(V&& v) const { v(W); v(b); }
};

struct EncoderDecoderConfig {
    int units = 100;
    int encoder_layers = 1;
    int decoder_layers = 1;
    std::vector<int> dense_widths{64, 32, 16, 8, 1};
    int input_features = 0;
    int timesteps = 0;
    // Raw inputs live on a [0, 255] scale; folding 1/255 into the first layer
    // keeps gate pre-activations in the responsive range of sigmoid/tanh.
    double input_scale = 1.0 / 255.0;
    bool log1p_target = false;

    void validate() const {
        if (units <= 0) throw DomainError("units must be positive");
        if (encoder_layers <= 0) throw DomainError("encoder_layers must be positive");
        if (decoder_layers <= 0) throw DomainError("decoder_layers must be positive");
        if (input_features <= 0) throw DomainError("input_features must be positive");
        if (timesteps <= 0) throw DomainError("timesteps must be positive");
        if (dense_widths.empty() || dense_widths.back() != 1)
            throw DomainError("dense head must end in a single output unit");
        for (int w : dense_widths)
            if (w <= 0) throw DomainError("dense widths must be positive");
        if (!(input_scale > 0.0)) throw DomainError("input_scale must be positive");
    }

    std::string name() const {
        return std::to_string(units) + "-" + std::to_string(encoder_layers) + "-" +
               std::to_string(decoder_layers);
    }

    nlohmann::json to_json() const {
        return {{"units", units},
                {"encoder_layers", encoder_layers},
                {"decoder_layers", decoder_layers},
                {"dense_widths", dense_widths},
                {"input_features", input_features},
                {"timesteps", timesteps},
                {"input_scale", input_scale},
                {"log1p_target", log1p_target}};
    }

    static EncoderDecoderConfig from_json(const nlohmann::json& j) {
        EncoderDecoderConfig cfg;
        cfg.units = j.at("units").get<int>();
        cfg.encoder_layers = j.at("encoder_layers").get<int>();
        cfg.decoder_layers = j.at("decoder_layers").get<int>();
        cfg.dense_widths = j.at("dense_widths").get<std::vector<int>>();
        cfg.input_features = j.at("input_features").get<int>();
        cfg.timesteps = j.at("timesteps").get<int>();
        cfg.input_scale = j.at("input_scale").get<double>();
        cfg.log1p_target = j.value("log1p_target", false);
        cfg.validate();
        return cfg;
    }
};

// Encoder reads the window; its final top-layer hidden state is repeated as
// the decoder input at every timestep; a shared dense head maps each decoder
// hidden state to one output.
template <class Scalar>
struct EncoderDecoderModel {
    using scalar_type = Scalar;

    EncoderDecoderConfig config;
    std::vector<LSTMCellParams<Scalar>> encoder;
    std::vector<LSTMCellParams<Scalar>> decoder;
    std::vector<DenseLayer<Scalar>> head;

    void build(const EncoderDecoderConfig& cfg) {
        cfg.validate();
        config = cfg;
        encoder.assign(std::size_t(cfg.encoder_layers), {});
        decoder.assign(std::size_t(cfg.decoder_layers), {});
        for (int l = 0; l < cfg.encoder_layers; ++l)
            encoder[std::size_t(l)].build(cfg.units, l == 0 ? cfg.input_features : cfg.units);
        for (int l = 0; l < cfg.decoder_layers; ++l)
            decoder[std::size_t(l)].build(cfg.units, cfg.units);
        head.assign(cfg.dense_widths.size(), {});
        int in = cfg.units;
        for (std::size_t k = 0; k < cfg.dense_widths.size(); ++k) {
            head[k].build(cfg.dense_widths[k], in);
            in = cfg.dense_widths[k];
        }
    }

    static EncoderDecoderModel make(const EncoderDecoderConfig& cfg, std::uint64_t seed) {
        EncoderDecoderModel m;
        m.build(cfg);
        Rng rng(seed);
        for (auto& cell : m.encoder) cell.init_params(rng);
        for (auto& cell : m.decoder) cell.init_params(rng);
        for (auto& layer : m.head) layer.init_params(rng);
        return m;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& cell : encoder) n += cell.param_count();
        for (const auto& cell : decoder) n += cell.param_count();
        for (const auto& layer : head) n += layer.param_count();
        return n;
    }

    // Fixed visitation order; checkpoint and optimizer state both rely on it.
    std::vector<Mat<Scalar>*> tensors() {
        std::vector<Mat<Scalar>*> out;
        auto push = [&](Mat<Scalar>& m) { out.push_back(&m); };
        for (auto& cell : encoder) cell.visit(push);
        for (auto& cell : decoder) cell.visit(push);
        for (auto& layer : head) layer.visit(push);
        return out;
    }
    std::vector<const Mat<Scalar>*> tensors() const {
        std::vector<const Mat<Scalar>*> out;
        auto push = [&](const Mat<Scalar>& m) { out.push_back(&m); };
        for (const auto& cell : encoder) cell.visit(push);
        for (const auto& cell : decoder) cell.visit(push);
        for (const auto& layer : head) layer.visit(push);
        return out;
    }

    void set_zero() {
        for (auto* t : tensors()) t->setZero();
    }
};

template <class Scalar>
struct ForwardCache {
    std::vector<Mat<Scalar>> x_scaled;                     // [t], F x B
    std::vector<std::vector<LSTMCellState<Scalar>>> enc;   // [layer][t]
    std::vector<std::vector<LSTMCellState<Scalar>>> dec;   // [layer][t]
    Mat<Scalar> context;                                   // H x B
    std::vector<std::vector<Mat<Scalar>>> head_z;          // [t][k], pre-activation
    Mat<Scalar> y_hat;                                     // B x T
};

template <class Scalar>
Mat<Scalar> forward(const EncoderDecoderModel<Scalar>& m, const std::vector<Mat<Scalar>>& x,
                    ForwardCache<Scalar>* cache_out = nullptr) {
    const auto& cfg = m.config;
    const int T = cfg.timesteps;
    const int H = cfg.units;
    if (int(x.size()) != T)
        throw DomainError("expected " + std::to_string(T) + " input steps, got " +
                          std::to_string(x.size()));
    const Eigen::Index B = x[0].cols();
    for (const auto& xt : x)
        if (xt.rows() != cfg.input_features || xt.cols() != B)
            throw DomainError("inconsistent input step shapes");
    if (B == 0) throw DomainError("empty batch");

    ForwardCache<Scalar> local;
    ForwardCache<Scalar>& cache = cache_out ? *cache_out : local;
    cache.x_scaled.resize(std::size_t(T));
    for (int t = 0; t < T; ++t)
        cache.x_scaled[std::size_t(t)] = x[std::size_t(t)] * Scalar(cfg.input_scale);

    const Mat<Scalar> zero_h = Mat<Scalar>::Zero(H, B);

    cache.enc.assign(m.encoder.size(), std::vector<LSTMCellState<Scalar>>(std::size_t(T)));
    for (std::size_t l = 0; l < m.encoder.size(); ++l) {
        for (int t = 0; t < T; ++t) {
            const Mat<Scalar>& in =
                l == 0 ? cache.x_scaled[std::size_t(t)] : cache.enc[l - 1][std::size_t(t)].h;
            const Mat<Scalar>& h_prev = t == 0 ? zero_h : cache.enc[l][std::size_t(t - 1)].h;
            const Mat<Scalar>& c_prev = t == 0 ? zero_h : cache.enc[l][std::size_t(t - 1)].c;
            lstm_cell_step(m.encoder[l], in, h_prev, c_prev, cache.enc[l][std::size_t(t)]);
        }
    }
    cache.context = cache.enc.back()[std::size_t(T - 1)].h;

    cache.dec.assign(m.decoder.size(), std::vector<LSTMCellState<Scalar>>(std::size_t(T)));
    for (std::size_t l = 0; l < m.decoder.size(); ++l) {
        for (int t = 0; t < T; ++t) {
            const Mat<Scalar>& in = l == 0 ? cache.context : cache.dec[l - 1][std::size_t(t)].h;
            const Mat<Scalar>& h_prev = t == 0 ? zero_h : cache.dec[l][std::size_t(t - 1)].h;
            const Mat<Scalar>& c_prev = t == 0 ? zero_h : cache.dec[l][std::size_t(t - 1)].c;
            lstm_cell_step(m.decoder[l], in, h_prev, c_prev, cache.dec[l][std::size_t(t)]);
        }
    }

    const std::size_t K = m.head.size();
    cache.head_z.assign(std::size_t(T), std::vector<Mat<Scalar>>(K));
    cache.y_hat.resize(B, T);
    for (int t = 0; t < T; ++t) {
        Mat<Scalar> a = cache.dec.back()[std::size_t(t)].h;
        for (std::size_t k = 0; k < K; ++k) {
            Mat<Scalar> z = m.head[k].W * a;
            z.colwise() += m.head[k].b.col(0);
            cache.head_z[std::size_t(t)][k] = z;
            a = k + 1 < K ? z.cwiseMax(Scalar(0)) : z;
        }
        cache.y_hat.col(t) = a.row(0).transpose();
    }
    return cache.y_hat;
}

// dY is dL/dY with Y laid out B x T, matching forward's return.
template <class Scalar>
void backward(const EncoderDecoderModel<Scalar>& m, const ForwardCache<Scalar>& cache,
              const Mat<Scalar>& dY, EncoderDecoderModel<Scalar>& grads) {
    const auto& cfg = m.config;
    const int T = cfg.timesteps;
    const int H = cfg.units;
    if (cache.y_hat.rows() != dY.rows() || cache.y_hat.cols() != dY.cols())
        throw DomainError("dY shape does not match cached forward pass");
    const Eigen::Index B = dY.rows();
    const Mat<Scalar> zero_h = Mat<Scalar>::Zero(H, B);
    const std::size_t K = m.head.size();

    // Head, collecting dL/dh for the decoder's top layer at each t.
    std::vector<Mat<Scalar>> d_top(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        Mat<Scalar> dz = dY.col(t).transpose();  // 1 x B
        for (std::size_t k = K; k-- > 0;) {
            const Mat<Scalar> a_prev =
                k == 0 ? cache.dec.back()[std::size_t(t)].h
                       : cache.head_z[std::size_t(t)][k - 1].cwiseMax(Scalar(0));
            grads.head[k].W.noalias() += dz * a_prev.transpose();
            grads.head[k].b.col(0) += dz.rowwise().sum();
            Mat<Scalar> da = m.head[k].W.transpose() * dz;
            if (k == 0) {
                d_top[std::size_t(t)] = std::move(da);
            } else {
                const auto mask =
                    (cache.head_z[std::size_t(t)][k - 1].array() > Scalar(0)).template cast<Scalar>();
                dz = da.cwiseProduct(mask.matrix());
            }
        }
    }

    // Decoder, top layer down. Layer 0 consumes the repeated context, so its
    // input gradients sum over time into d_context.
    Mat<Scalar> d_context = Mat<Scalar>::Zero(H, B);
    std::vector<Mat<Scalar>> d_above = std::move(d_top);
    for (std::size_t l = m.decoder.size(); l-- > 0;) {
        std::vector<Mat<Scalar>> d_below;
        if (l > 0) d_below.assign(std::size_t(T), Mat<Scalar>());
        Mat<Scalar> dh_next = zero_h;
        Mat<Scalar> dc = zero_h;
        Mat<Scalar> dx(H, B);
        for (int t = T - 1; t >= 0; --t) {
            const Mat<Scalar> dh = d_above[std::size_t(t)] + dh_next;
            const Mat<Scalar>& x_t =
                l == 0 ? cache.context : cache.dec[l - 1][std::size_t(t)].h;
            const Mat<Scalar>& h_prev = t == 0 ? zero_h : cache.dec[l][std::size_t(t - 1)].h;
            const Mat<Scalar>& c_prev = t == 0 ? zero_h : cache.dec[l][std::size_t(t - 1)].c;
            lstm_cell_backward(m.decoder[l], x_t, h_prev, c_prev, cache.dec[l][std::size_t(t)],
                               dh, dc, grads.decoder[l], dh_next, &dx);
            if (l == 0)
                d_context += dx;
            else
                d_below[std::size_t(t)] = dx;
        }
        if (l > 0) d_above = std::move(d_below);
    }

    // Encoder: the only gradient entering from above is d_context at the top
    // layer's final step; lower layers receive dx from the layer above.
    d_above.assign(std::size_t(T), zero_h);
    d_above[std::size_t(T - 1)] = d_context;
    for (std::size_t l = m.encoder.size(); l-- > 0;) {
        std::vector<Mat<Scalar>> d_below;
        if (l > 0) d_below.assign(std::size_t(T), Mat<Scalar>());
        Mat<Scalar> dh_next = zero_h;
        Mat<Scalar> dc = zero_h;
        Mat<Scalar> dx(H, B);
        for (int t = T - 1; t >= 0; --t) {
            const Mat<Scalar> dh = d_above[std::size_t(t)] + dh_next;
            const Mat<Scalar>& x_t =
                l == 0 ? cache.x_scaled[std::size_t(t)] : cache.enc[l - 1][std::size_t(t)].h;
            const Mat<Scalar>& h_prev = t == 0 ? zero_h : cache.enc[l][std::size_t(t - 1)].h;
            const Mat<Scalar>& c_prev = t == 0 ? zero_h : cache.enc[l][std::size_t(t - 1)].c;
            lstm_cell_backward(m.encoder[l], x_t, h_prev, c_prev, cache.enc[l][std::size_t(t)],
                               dh, dc, grads.encoder[l], dh_next,
                               l > 0 ? &dx : nullptr);
            if (l > 0) d_below[std::size_t(t)] = dx;
        }
        if (l > 0) d_above = std::move(d_below);
    }
}

}  // namespace diskrul
