#include "patchforge/autodiff.hpp"

#include <cmath>

namespace patchforge::ad {

int Graph::push(Tensor value, std::function<void(Graph&, int)> back) {
    Node n;
    n.grad = Tensor(value.shape, 0.0);
    n.val = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Var Graph::input(Tensor value) {
    return {push(std::move(value), nullptr)};
}

Var Graph::add(Var a, Var b) {
    Tensor out = value(a) + value(b);
    return {push(std::move(out), [a, b](Graph& gr, int id) {
        gr.g(a.id) += gr.g(id);
        gr.g(b.id) += gr.g(id);
    })};
}

Var Graph::sub(Var a, Var b) {
    Tensor out = value(a) - value(b);
    return {push(std::move(out), [a, b](Graph& gr, int id) {
        gr.g(a.id) += gr.g(id);
        gr.g(b.id) -= gr.g(id);
    })};
}

Var Graph::scale(Var a, double s) {
    Tensor out = value(a) * s;
    return {push(std::move(out), [a, s](Graph& gr, int id) {
        const Tensor& go = gr.g(id);
        Tensor& ga = gr.g(a.id);
        for (std::size_t i = 0; i < go.size(); ++i) ga.v[i] += s * go.v[i];
    })};
}

Var Graph::add_scaled(Var a, Var b, double s) {
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += s * vb.v[i];
    return {push(std::move(out), [a, b, s](Graph& gr, int id) {
        const Tensor& go = gr.g(id);
        Tensor& ga = gr.g(a.id);
        Tensor& gb = gr.g(b.id);
        for (std::size_t i = 0; i < go.size(); ++i) {
            ga.v[i] += go.v[i];
            gb.v[i] += s * go.v[i];
        }
    })};
}

Var Graph::add_const(Var a, const Tensor& c) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += c.v[i];
    return {push(std::move(out), [a](Graph& gr, int id) {
        gr.g(a.id) += gr.g(id);
    })};
}

Var Graph::cmul(Var a, const Tensor& c) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] *= c.v[i];
    Tensor cc = c;
    return {push(std::move(out), [a, cc](Graph& gr, int id) {
        const Tensor& go = gr.g(id);
        Tensor& ga = gr.g(a.id);
        for (std::size_t i = 0; i < go.size(); ++i) ga.v[i] += cc.v[i] * go.v[i];
    })};
}

Var Graph::matvec(const Tensor& m, Var x, std::vector<std::size_t> out_shape) {
    const std::size_t rows = m.shape[0], cols = m.shape[1];
    const Tensor& vx = value(x);
    if (vx.size() != cols) throw ConfigError("matvec: dimension mismatch");
    Tensor out(out_shape.empty() ? std::vector<std::size_t>{rows} : std::move(out_shape), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* mr = &m.v[r * cols];
        for (std::size_t c = 0; c < cols; ++c) acc += mr[c] * vx.v[c];
        out.v[r] = acc;
    }
    Tensor mm = m;
    return {push(std::move(out), [x, mm, rows, cols](Graph& gr, int id) {
        const Tensor& go = gr.g(id);
        Tensor& gx = gr.g(x.id);
        for (std::size_t r = 0; r < rows; ++r) {
            const double gr_r = go.v[r];
            const double* mr = &mm.v[r * cols];
            for (std::size_t c = 0; c < cols; ++c) gx.v[c] += mr[c] * gr_r;
        }
    })};
}

Var Graph::matmul(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    const std::size_t r = va.shape[0], k = va.shape[1], c = vb.shape[1];
    if (vb.shape[0] != k) throw ConfigError("matmul: dimension mismatch");
    Tensor out({r, c}, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const double aij = va.v[i * k + j];
            for (std::size_t l = 0; l < c; ++l) out.v[i * c + l] += aij * vb.v[j * c + l];
        }
    return {push(std::move(out), [a, b, r, k, c](Graph& gr, int id) {
        const Tensor& go = gr.g(id);
        const Tensor& va = gr.value(a);
        const Tensor& vb = gr.value(b);
        Tensor& ga = gr.g(a.id);
        Tensor& gb = gr.g(b.id);
        // dA = dC B^T ; dB = A^T dC
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t l = 0; l < c; ++l) {
                const double gil = go.v[i * c + l];
                for (std::size_t j = 0; j < k; ++j) {
                    ga.v[i * k + j] += gil * vb.v[j * c + l];
                    gb.v[j * c + l] += va.v[i * k + j] * gil;
                }
            }
    })};
}

Var Graph::matmul_nt(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    const std::size_t r = va.shape[0], k = va.shape[1], s = vb.shape[0];
    if (vb.shape[1] != k) throw ConfigError("matmul_nt: dimension mismatch");
    Tensor out({r, s}, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < s; ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < k; ++l) acc += va.v[i * k + l] * vb.v[j * k + l];
            out.v[i * s + j] = acc;
        }
    return {push(std::move(out), [a, b, r, k, s](Graph& gr, int id) {
        const Tensor& go = gr.g(id);
        const Tensor& va = gr.value(a);
        const Tensor& vb = gr.value(b);
        Tensor& ga = gr.g(a.id);
        Tensor& gb = gr.g(b.id);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < s; ++j) {
                const double gij = go.v[i * s + j];
                for (std::size_t l = 0; l < k; ++l) {
                    ga.v[i * k + l] += gij * vb.v[j * k + l];
                    gb.v[j * k + l] += gij * va.v[i * k + l];
                }
            }
    })};
}

Var Graph::rmul_const(Var x, const Tensor& w, std::size_t c) {
    const Tensor& vx = value(x);
    const std::size_t r = vx.shape[0], k = vx.shape[1];
    if (w.size() != k * c) throw ConfigError("rmul_const: dimension mismatch");
    Tensor out({r, c}, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const double xij = vx.v[i * k + j];
            for (std::size_t l = 0; l < c; ++l) out.v[i * c + l] += xij * w.v[j * c + l];
        }
    Tensor ww = w;
    return {push(std::move(out), [x, ww, c](Graph& gr, int id) {
        const Tensor& go = gr.g(id);
        Tensor& gx = gr.g(x.id);
        const std::size_t r = gx.shape[0], k = gx.shape[1];
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                double acc = 0.0;
                for (std::size_t l = 0; l < c; ++l) acc += go.v[i * c + l] * ww.v[j * c + l];
                gx.v[i * k + j] += acc;
            }
    })};
}

Var Graph::reshape(Var a, std::vector<std::size_t> shape) {
    Tensor out(std::move(shape), value(a).v);
    return {push(std::move(out), [a](Graph& gr, int id) {
        const Tensor& go = gr.g(id);
        Tensor& ga = gr.g(a.id);
        for (std::size_t i = 0; i < go.size(); ++i) ga.v[i] += go.v[i];
    })};
}

Var Graph::softmax_rows(Var a) {
    const Tensor& va = value(a);
    const std::size_t rows = va.shape[0], cols = va.shape[1];
    Tensor out(va.shape, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = va.v[r * cols];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, va.v[r * cols + c]);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            out.v[r * cols + c] = std::exp(va.v[r * cols + c] - mx);
            z += out.v[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c) out.v[r * cols + c] /= z;
    }
    return {push(std::move(out), [a, rows, cols](Graph& gr, int id) {
        const Tensor& y = gr.value({id});
        const Tensor& go = gr.g(id);
        Tensor& ga = gr.g(a.id);
        for (std::size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < cols; ++c) s += go.v[r * cols + c] * y.v[r * cols + c];
            for (std::size_t c = 0; c < cols; ++c)
                ga.v[r * cols + c] += y.v[r * cols + c] * (go.v[r * cols + c] - s);
        }
    })};
}

Var Graph::mean_of(const std::vector<Var>& xs) {
    if (xs.empty()) throw InputError("mean_of: empty list");
    Tensor out = value(xs[0]);
    for (std::size_t i = 1; i < xs.size(); ++i) out += value(xs[i]);
    out *= 1.0 / static_cast<double>(xs.size());
    std::vector<Var> parents = xs;
    return {push(std::move(out), [parents](Graph& gr, int id) {
        const Tensor& go = gr.g(id);
        const double inv = 1.0 / static_cast<double>(parents.size());
        for (Var p : parents) {
            Tensor& gp = gr.g(p.id);
            for (std::size_t i = 0; i < go.size(); ++i) gp.v[i] += inv * go.v[i];
        }
    })};
}

Var Graph::mean_all(Var a) {
    const Tensor& va = value(a);
    double m = 0.0;
    for (double x : va.v) m += x;
    m /= static_cast<double>(va.size());
    return {push(Tensor({1}, {m}), [a](Graph& gr, int id) {
        const double go = gr.g(id).v[0];
        Tensor& ga = gr.g(a.id);
        const double inv = go / static_cast<double>(ga.size());
        for (auto& x : ga.v) x += inv;
    })};
}

Var Graph::variance_all(Var a) {
    const Tensor& va = value(a);
    const double n = static_cast<double>(va.size());
    double mu = 0.0;
    for (double x : va.v) mu += x;
    mu /= n;
    double var = 0.0;
    for (double x : va.v) var += (x - mu) * (x - mu);
    var /= n;
    return {push(Tensor({1}, {var}), [a, mu, n](Graph& gr, int id) {
        const double go = gr.g(id).v[0];
        const Tensor& va = gr.value(a);
        Tensor& ga = gr.g(a.id);
        for (std::size_t i = 0; i < va.size(); ++i)
            ga.v[i] += go * 2.0 * (va.v[i] - mu) / n;
    })};
}

Var Graph::normalize_l2(Var a) {
    const Tensor& va = value(a);
    const double nrm = l2_norm(va);
    if (nrm < 1e-300) throw InputError("normalize_l2: zero-norm input");
    Tensor out = va * (1.0 / nrm);
    return {push(std::move(out), [a, nrm](Graph& gr, int id) {
        const Tensor& y = gr.value({id});
        const Tensor& go = gr.g(id);
        Tensor& ga = gr.g(a.id);
        double yd = 0.0;
        for (std::size_t i = 0; i < go.size(); ++i) yd += y.v[i] * go.v[i];
        for (std::size_t i = 0; i < go.size(); ++i)
            ga.v[i] += (go.v[i] - y.v[i] * yd) / nrm;
    })};
}

Var Graph::dot(Var a, Var b) {
    const double d = patchforge::dot(value(a), value(b));
    return {push(Tensor({1}, {d}), [a, b](Graph& gr, int id) {
        const double go = gr.g(id).v[0];
        const Tensor& va = gr.value(a);
        const Tensor& vb = gr.value(b);
        Tensor& ga = gr.g(a.id);
        Tensor& gb = gr.g(b.id);
        for (std::size_t i = 0; i < va.size(); ++i) {
            ga.v[i] += go * vb.v[i];
            gb.v[i] += go * va.v[i];
        }
    })};
}

Var Graph::cosine(Var a, Var b) {
    return dot(normalize_l2(a), normalize_l2(b));
}

Var Graph::clamp01(Var a) {
    const Tensor& va = value(a);
    Tensor out = va;
    for (auto& x : out.v) x = std::min(1.0, std::max(0.0, x));
    return {push(std::move(out), [a](Graph& gr, int id) {
        const Tensor& go = gr.g(id);
        const Tensor& va = gr.value(a);
        Tensor& ga = gr.g(a.id);
        for (std::size_t i = 0; i < go.size(); ++i)
            if (va.v[i] > 0.0 && va.v[i] < 1.0) ga.v[i] += go.v[i];
    })};
}

void Graph::backward(Var scalar_out) {
    if (value(scalar_out).size() != 1) throw ConfigError("backward: output is not scalar");
    for (auto& n : nodes_)
        for (auto& x : n.grad.v) x = 0.0;
    nodes_[scalar_out.id].grad.v[0] = 1.0;
    for (int i = scalar_out.id; i >= 0; --i)
        if (nodes_[i].back) nodes_[i].back(*this, i);
}

}  // namespace patchforge::ad
