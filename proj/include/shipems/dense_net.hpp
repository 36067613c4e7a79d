#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shipems/binio.hpp"
#include "shipems/rng.hpp"

namespace shipems {

enum class Activation : std::uint32_t { relu = 0, tanh = 1, identity = 2 };

struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
};

struct Layer {
    Matrix w;               // out x in, row-major
    std::vector<double> b;  // out
    Activation act = Activation::identity;
};

// Small fully connected network. The output is act(z) * output_scale; for an
// actor output_scale is the action limit, for a critic it is 1.
struct DenseNet {
    std::vector<Layer> layers;
    double output_scale = 1.0;

    int input_dim() const { return layers.front().w.cols; }
    int output_dim() const { return layers.back().w.rows; }

    bool same_topology(const DenseNet& o) const {
        if (layers.size() != o.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].w.rows != o.layers[i].w.rows ||
                layers[i].w.cols != o.layers[i].w.cols ||
                layers[i].act != o.layers[i].act)
                return false;
        return true;
    }
};

// Uniform fan-in initialisation; the final layer range can be shrunk (used to
// keep the initial policy close to zero).
inline DenseNet make_mlp(int input, const std::vector<int>& hidden, int output,
                         Activation hidden_act, Activation output_act,
                         double output_scale, Rng& rng,
                         double final_layer_scale = 1.0) {
    if (input < 1 || output < 1) throw std::invalid_argument("bad mlp dimensions");
    DenseNet net;
    net.output_scale = output_scale;
    std::vector<int> dims;
    dims.push_back(input);
    for (int h : hidden) dims.push_back(h);
    dims.push_back(output);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer layer;
        layer.w = Matrix(dims[i + 1], dims[i]);
        layer.b.assign(static_cast<std::size_t>(dims[i + 1]), 0.0);
        layer.act = (i + 2 == dims.size()) ? output_act : hidden_act;
        double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
        if (i + 2 == dims.size()) bound *= final_layer_scale;
        for (auto& v : layer.w.a) v = rng.uniform(-bound, bound);
        for (auto& v : layer.b) v = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

inline DenseNet make_actor(int state_dim, const std::vector<int>& hidden, int action_dim,
                           double action_limit, Rng& rng) {
    return make_mlp(state_dim, hidden, action_dim, Activation::relu, Activation::tanh,
                    action_limit, rng, 0.1);
}

inline DenseNet make_critic(int state_dim, int action_dim, const std::vector<int>& hidden,
                            Rng& rng) {
    return make_mlp(state_dim + action_dim, hidden, 1, Activation::relu,
                    Activation::identity, 1.0, rng);
}

inline double activate(Activation act, double z) {
    switch (act) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::identity: return z;
    }
    return z;
}

inline double activate_grad(Activation act, double z, double a) {
    switch (act) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - a * a;
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

struct ForwardCache {
    std::vector<std::vector<double>> pre;  // pre-activation per layer
    std::vector<std::vector<double>> act;  // act[0] = input, act[i+1] = layer i output (unscaled)
    std::vector<double> output;            // scaled network output
    bool valid = false;
};

inline void forward(const DenseNet& net, std::span<const double> input, ForwardCache& c) {
    if (static_cast<int>(input.size()) != net.input_dim())
        throw std::invalid_argument("forward: input dimension mismatch");
    const std::size_t n_layers = net.layers.size();
    c.pre.resize(n_layers);
    c.act.resize(n_layers + 1);
    c.act[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < n_layers; ++l) {
        const Layer& layer = net.layers[l];
        const auto& in = c.act[l];
        auto& z = c.pre[l];
        auto& out = c.act[l + 1];
        z.assign(static_cast<std::size_t>(layer.w.rows), 0.0);
        out.resize(static_cast<std::size_t>(layer.w.rows));
        for (int i = 0; i < layer.w.rows; ++i) {
            const double* wrow = layer.w.a.data() + static_cast<std::size_t>(i) * layer.w.cols;
            double acc = layer.b[static_cast<std::size_t>(i)];
            for (int j = 0; j < layer.w.cols; ++j) acc += wrow[j] * in[static_cast<std::size_t>(j)];
            z[static_cast<std::size_t>(i)] = acc;
            out[static_cast<std::size_t>(i)] = activate(layer.act, acc);
        }
    }
    c.output.resize(c.act[n_layers].size());
    for (std::size_t i = 0; i < c.output.size(); ++i)
        c.output[i] = net.output_scale * c.act[n_layers][i];
    c.valid = true;
}

inline std::vector<double> forward(const DenseNet& net, std::span<const double> input) {
    ForwardCache c;
    forward(net, input, c);
    return c.output;
}

struct Gradients {
    std::vector<Matrix> dw;
    std::vector<std::vector<double>> db;
    std::vector<double> dinput;

    void zero() {
        for (auto& m : dw) std::fill(m.a.begin(), m.a.end(), 0.0);
        for (auto& v : db) std::fill(v.begin(), v.end(), 0.0);
        std::fill(dinput.begin(), dinput.end(), 0.0);
    }
};

inline Gradients make_gradients(const DenseNet& net) {
    Gradients g;
    for (const auto& layer : net.layers) {
        g.dw.emplace_back(layer.w.rows, layer.w.cols);
        g.db.emplace_back(layer.b.size(), 0.0);
    }
    g.dinput.assign(static_cast<std::size_t>(net.input_dim()), 0.0);
    return g;
}

// Reverse-mode gradients for every parameter and for the input, given
// dL/d(output). Accumulates into `g` so batches can be summed in place.
inline void backward(const DenseNet& net, const ForwardCache& c,
                     std::span<const double> upstream, Gradients& g) {
    if (!c.valid) throw std::logic_error("backward: no cached forward pass");
    if (upstream.size() != c.output.size())
        throw std::invalid_argument("backward: upstream dimension mismatch");

    const std::size_t n_layers = net.layers.size();
    std::vector<double> delta(upstream.size());
    // dL/d(pre-activation) of the output layer
    for (std::size_t i = 0; i < delta.size(); ++i) {
        const double z = c.pre[n_layers - 1][i];
        const double a = c.act[n_layers][i];
        delta[i] = upstream[i] * net.output_scale * activate_grad(net.layers[n_layers - 1].act, z, a);
    }

    for (std::size_t l = n_layers; l-- > 0;) {
        const Layer& layer = net.layers[l];
        const auto& in = c.act[l];
        auto& dw = g.dw[l];
        auto& db = g.db[l];
        for (int i = 0; i < layer.w.rows; ++i) {
            const double d = delta[static_cast<std::size_t>(i)];
            db[static_cast<std::size_t>(i)] += d;
            double* dwrow = dw.a.data() + static_cast<std::size_t>(i) * dw.cols;
            for (int j = 0; j < layer.w.cols; ++j)
                dwrow[j] += d * in[static_cast<std::size_t>(j)];
        }
        // propagate to the previous layer (or the input)
        std::vector<double> prev(static_cast<std::size_t>(layer.w.cols), 0.0);
        for (int i = 0; i < layer.w.rows; ++i) {
            const double d = delta[static_cast<std::size_t>(i)];
            const double* wrow = layer.w.a.data() + static_cast<std::size_t>(i) * layer.w.cols;
            for (int j = 0; j < layer.w.cols; ++j) prev[static_cast<std::size_t>(j)] += d * wrow[j];
        }
        if (l == 0) {
            for (std::size_t j = 0; j < prev.size(); ++j) g.dinput[j] += prev[j];
        } else {
            const Layer& below = net.layers[l - 1];
            delta.assign(prev.size(), 0.0);
            for (std::size_t j = 0; j < prev.size(); ++j) {
                const double z = c.pre[l - 1][j];
                const double a = c.act[l][j];
                delta[j] = prev[j] * activate_grad(below.act, z, a);
            }
        }
    }
}

struct AdamState {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t step_count = 0;
    std::vector<Matrix> mw, vw;
    std::vector<std::vector<double>> mb, vb;
};

inline AdamState make_adam(const DenseNet& net, double lr, double beta1 = 0.9,
                           double beta2 = 0.999, double eps = 1e-8) {
    AdamState s;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    for (const auto& layer : net.layers) {
        s.mw.emplace_back(layer.w.rows, layer.w.cols);
        s.vw.emplace_back(layer.w.rows, layer.w.cols);
        s.mb.emplace_back(layer.b.size(), 0.0);
        s.vb.emplace_back(layer.b.size(), 0.0);
    }
    return s;
}

// Bias-corrected Adam update (descent direction: parameters move against the
// supplied gradients).
inline void adam_step(DenseNet& net, const Gradients& g, AdamState& s) {
    if (s.mw.size() != net.layers.size())
        throw std::invalid_argument("adam_step: optimizer/network mismatch");
    ++s.step_count;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
    auto update = [&](double& p, double grad, double& m, double& v) {
        m = s.beta1 * m + (1.0 - s.beta1) * grad;
        v = s.beta2 * v + (1.0 - s.beta2) * grad * grad;
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        p -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        for (std::size_t i = 0; i < layer.w.a.size(); ++i)
            update(layer.w.a[i], g.dw[l].a[i], s.mw[l].a[i], s.vw[l].a[i]);
        for (std::size_t i = 0; i < layer.b.size(); ++i)
            update(layer.b[i], g.db[l][i], s.mb[l][i], s.vb[l][i]);
    }
}

// theta' <- tau * theta + (1 - tau) * theta'
inline void soft_update(DenseNet& target, const DenseNet& online, double tau) {
    if (!target.same_topology(online))
        throw std::invalid_argument("soft_update: topology mismatch");
    if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("soft_update: tau outside [0, 1]");
    for (std::size_t l = 0; l < target.layers.size(); ++l) {
        auto& t = target.layers[l];
        const auto& o = online.layers[l];
        for (std::size_t i = 0; i < t.w.a.size(); ++i)
            t.w.a[i] = tau * o.w.a[i] + (1.0 - tau) * t.w.a[i];
        for (std::size_t i = 0; i < t.b.size(); ++i)
            t.b[i] = tau * o.b[i] + (1.0 - tau) * t.b[i];
    }
}

// ---------------------------------------------------------------------------
// Checkpoint format (little-endian): "SEMSNET1", layer topology, parameters,
// optional optimizer state.

inline void save_net(std::ostream& os, const DenseNet& net, const AdamState* opt = nullptr) {
    os.write("SEMSNET1", 8);
    write_u32(os, 1);  // format version
    write_u32(os, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& layer : net.layers) {
        write_u32(os, static_cast<std::uint32_t>(layer.w.rows));
        write_u32(os, static_cast<std::uint32_t>(layer.w.cols));
        write_u32(os, static_cast<std::uint32_t>(layer.act));
    }
    write_f64(os, net.output_scale);
    for (const auto& layer : net.layers) {
        write_f64_vec(os, layer.w.a);
        write_f64_vec(os, layer.b);
    }
    write_u32(os, opt ? 1 : 0);
    if (opt) {
        write_u64(os, opt->step_count);
        write_f64(os, opt->lr);
        write_f64(os, opt->beta1);
        write_f64(os, opt->beta2);
        write_f64(os, opt->eps);
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            write_f64_vec(os, opt->mw[l].a);
            write_f64_vec(os, opt->vw[l].a);
            write_f64_vec(os, opt->mb[l]);
            write_f64_vec(os, opt->vb[l]);
        }
    }
}

inline DenseNet load_net(std::istream& is, AdamState* opt = nullptr) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != "SEMSNET1")
        throw std::runtime_error("not a network checkpoint (bad magic)");
    const std::uint32_t version = read_u32(is);
    if (version != 1) throw std::runtime_error("unsupported checkpoint version");
    const std::uint32_t n_layers = read_u32(is);
    DenseNet net;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        Layer layer;
        const int rows = static_cast<int>(read_u32(is));
        const int cols = static_cast<int>(read_u32(is));
        layer.act = static_cast<Activation>(read_u32(is));
        layer.w = Matrix(rows, cols);
        layer.b.assign(static_cast<std::size_t>(rows), 0.0);
        net.layers.push_back(std::move(layer));
    }
    net.output_scale = read_f64(is);
    for (auto& layer : net.layers) {
        layer.w.a = read_f64_vec(is);
        layer.b = read_f64_vec(is);
        if (layer.w.a.size() !=
            static_cast<std::size_t>(layer.w.rows) * static_cast<std::size_t>(layer.w.cols))
            throw std::runtime_error("corrupt checkpoint: weight size mismatch");
    }
    const bool has_opt = read_u32(is) != 0;
    if (has_opt) {
        AdamState s;
        s.step_count = read_u64(is);
        s.lr = read_f64(is);
        s.beta1 = read_f64(is);
        s.beta2 = read_f64(is);
        s.eps = read_f64(is);
        for (const auto& layer : net.layers) {
            Matrix mw(layer.w.rows, layer.w.cols), vw(layer.w.rows, layer.w.cols);
            mw.a = read_f64_vec(is);
            vw.a = read_f64_vec(is);
            s.mw.push_back(std::move(mw));
            s.vw.push_back(std::move(vw));
            s.mb.push_back(read_f64_vec(is));
            s.vb.push_back(read_f64_vec(is));
        }
        if (opt) *opt = std::move(s);
    } else if (opt) {
        *opt = make_adam(net, opt->lr, opt->beta1, opt->beta2, opt->eps);
    }
    return net;
}

inline void save_net_file(const std::string& path, const DenseNet& net,
                          const AdamState* opt = nullptr) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    save_net(os, net, opt);
}

inline DenseNet load_net_file(const std::string& path, AdamState* opt = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    return load_net(is, opt);
}

// ---------------------------------------------------------------------------
// Finite-difference verification. The scalar probe loss is
// L(theta) = dot(net(input), upstream); central differences of L check every
// parameter gradient independently of the reverse-mode path.

namespace fd_detail {

inline double probe_loss(const DenseNet& net, std::span<const double> input,
                         std::span<const double> upstream, ForwardCache& scratch) {
    forward(net, input, scratch);
    double loss = 0.0;
    for (std::size_t i = 0; i < scratch.output.size(); ++i)
        loss += scratch.output[i] * upstream[i];
    return loss;
}

// signature of relu regions; used to detect kink crossings during perturbation
inline void relu_signs(const DenseNet& net, const ForwardCache& c, std::vector<std::int8_t>& out) {
    out.clear();
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (net.layers[l].act != Activation::relu) continue;
        for (double z : c.pre[l]) out.push_back(z > 0.0 ? 1 : -1);
    }
}

}  // namespace fd_detail

struct GradCheckReport {
    std::size_t n_params = 0;
    std::size_t n_passed = 0;
    std::size_t n_excluded = 0;  // relu kink crossed within the probe step
    double max_rel_err = 0.0;    // over non-excluded parameters

    double pass_fraction() const {
        const std::size_t considered = n_params - n_excluded;
        return considered == 0 ? 1.0 : static_cast<double>(n_passed) / considered;
    }
};

inline Gradients finite_diff_gradients(const DenseNet& net, std::span<const double> input,
                                       std::span<const double> upstream, double h = 1e-5) {
    Gradients g = make_gradients(net);
    DenseNet probe = net;
    ForwardCache scratch;
    auto central = [&](double& p, double& slot) {
        const double save = p;
        p = save + h;
        const double up = fd_detail::probe_loss(probe, input, upstream, scratch);
        p = save - h;
        const double down = fd_detail::probe_loss(probe, input, upstream, scratch);
        p = save;
        slot = (up - down) / (2.0 * h);
    };
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        for (std::size_t i = 0; i < probe.layers[l].w.a.size(); ++i)
            central(probe.layers[l].w.a[i], g.dw[l].a[i]);
        for (std::size_t i = 0; i < probe.layers[l].b.size(); ++i)
            central(probe.layers[l].b[i], g.db[l][i]);
    }
    return g;
}

inline GradCheckReport gradient_check(const DenseNet& net, std::span<const double> input,
                                      std::span<const double> upstream, double h = 1e-5,
                                      double tol = 1e-4) {
    GradCheckReport rep;

    ForwardCache cache;
    forward(net, input, cache);
    Gradients analytic = make_gradients(net);
    backward(net, cache, upstream, analytic);

    DenseNet probe = net;
    ForwardCache scratch;
    std::vector<std::int8_t> signs_up, signs_down, signs_base;
    fd_detail::relu_signs(net, cache, signs_base);

    auto check_one = [&](double& p, double analytic_grad) {
        ++rep.n_params;
        const double save = p;
        p = save + h;
        const double up = fd_detail::probe_loss(probe, input, upstream, scratch);
        fd_detail::relu_signs(probe, scratch, signs_up);
        p = save - h;
        const double down = fd_detail::probe_loss(probe, input, upstream, scratch);
        fd_detail::relu_signs(probe, scratch, signs_down);
        p = save;
        if (signs_up != signs_base || signs_down != signs_base) {
            ++rep.n_excluded;  // derivative is not defined across the kink
            return;
        }
        const double fd = (up - down) / (2.0 * h);
        const double rel =
            std::abs(fd - analytic_grad) / std::max({std::abs(fd), std::abs(analytic_grad), 1e-6});
        rep.max_rel_err = std::max(rep.max_rel_err, rel);
        if (rel < tol) ++rep.n_passed;
    };

    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        for (std::size_t i = 0; i < probe.layers[l].w.a.size(); ++i)
            check_one(probe.layers[l].w.a[i], analytic.dw[l].a[i]);
        for (std::size_t i = 0; i < probe.layers[l].b.size(); ++i)
            check_one(probe.layers[l].b[i], analytic.db[l][i]);
    }
    return rep;
}

}  // namespace shipems
