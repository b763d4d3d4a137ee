#include "plapsys/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "plapsys/errors.hpp"

namespace plapsys {

double WeightDescriptor::sup_norm() const {
    double m = std::abs(default_value);
    for (const auto& piece : pieces) m = std::max(m, std::abs(piece.value));
    return m;
}

std::string_view to_string(WeightClass c) {
    switch (c) {
        case WeightClass::nonpositive: return "nonpositive";
        case WeightClass::nonnegative: return "nonnegative";
        case WeightClass::sign_changing: return "sign-changing";
        case WeightClass::zero: return "zero";
    }
    return "?";
}

CriticalExponents critical_exponents(double p, double q, int n) {
    auto star = [n](double s) { return s < n ? n * s / (n - s) : kInf; };
    return {star(p), star(q)};
}

namespace {

void require(bool ok, const char* key, const std::string& what) {
    if (!ok) throw ValidationError(key, what);
}

void check_exponent(double s, const char* key) {
    require(std::isfinite(s) && s > 1.0, key, "must be > 1");
    require(s > kMinExponent && s <= kMaxExponent, key, "unsupported exponent; the discretization supports (1.1, 10]");
}

void check_box(const Box& b, int dim, const std::string& key) {
    const bool ok = b.x[1] > b.x[0] && (dim == 1 || b.y[1] > b.y[0]) && std::isfinite(b.x[0]) &&
                    std::isfinite(b.x[1]) && std::isfinite(b.y[0]) && std::isfinite(b.y[1]);
    if (!ok) throw ValidationError(key, "box must have positive length/area");
}

}  // namespace

WeightMeasures weight_measures(const ProblemSpec& spec, int samples) {
    const auto& dom = spec.domain;
    const auto& b = dom.bounds;
    const int ny = dom.dim == 1 ? 1 : samples;
    const double hx = (b.x[1] - b.x[0]) / samples;
    const double hy = dom.dim == 1 ? 1.0 : (b.y[1] - b.y[0]) / samples;
    WeightMeasures m;
    for (int j = 0; j < ny; ++j) {
        const double y = dom.dim == 1 ? 0.0 : b.y[0] + (j + 0.5) * hy;
        for (int i = 0; i < samples; ++i) {
            const double f = spec.weight(b.x[0] + (i + 0.5) * hx, y, dom.dim);
            const double cell = hx * hy;
            if (f > 0) m.plus += cell;
            else if (f < 0) m.minus += cell;
            else m.zero += cell;
        }
    }
    return m;
}

RegimeReport validate_spec(const ProblemSpec& spec, int n) {
    check_exponent(spec.p, "p");
    check_exponent(spec.q, "q");
    require(std::isfinite(spec.alpha) && spec.alpha >= 1.0, "alpha", "must be >= 1");
    require(std::isfinite(spec.beta) && spec.beta >= 1.0, "beta", "must be >= 1");
    require(std::isfinite(spec.c1) && spec.c1 > 0.0, "c1", "must be > 0");
    require(std::isfinite(spec.c2) && spec.c2 > 0.0, "c2", "must be > 0");
    require(n == 1 || n == 2, "domain.dim", "must be 1 or 2");
    require(spec.domain.dim == n, "domain.dim", "does not match the requested dimension");
    check_box(spec.domain.bounds, n, "domain.bounds");
    require(spec.resolution >= 3, "resolution", "must be >= 3 (no interior node otherwise)");
    require(std::isfinite(spec.weight.default_value), "weight.default", "must be finite");
    for (std::size_t i = 0; i < spec.weight.pieces.size(); ++i) {
        const auto key = "weight.pieces[" + std::to_string(i) + "]";
        check_box(spec.weight.pieces[i].region, n, key + ".box");
        if (!std::isfinite(spec.weight.pieces[i].value)) throw ValidationError(key + ".value", "must be finite");
    }

    RegimeReport rep;
    const auto ce = critical_exponents(spec.p, spec.q, n);
    rep.p_star = ce.p_star;
    rep.q_star = ce.q_star;
    rep.sob_margin = spec.alpha / spec.p + spec.beta / spec.q - 1.0;
    const double sub = (std::isinf(ce.p_star) ? 0.0 : spec.alpha / ce.p_star) +
                       (std::isinf(ce.q_star) ? 0.0 : spec.beta / ce.q_star);
    rep.subcritical_margin = 1.0 - sub;
    rep.subcritical = sub < 1.0;
    rep.sob_ok = spec.alpha >= 1.0 && spec.beta >= 1.0 && rep.sob_margin > 0.0 && rep.subcritical;
    rep.super_pq = spec.alpha >= spec.p && spec.beta >= spec.q;

    rep.measures = weight_measures(spec);
    const auto& m = rep.measures;
    if (m.plus == 0.0 && m.minus == 0.0) rep.weight_class = WeightClass::zero;
    else if (m.plus == 0.0) rep.weight_class = WeightClass::nonpositive;
    else if (m.minus == 0.0) rep.weight_class = WeightClass::nonnegative;
    else rep.weight_class = WeightClass::sign_changing;
    rep.interior_plus_zero = !nonnegative_boxes(spec).empty();
    return rep;
}

std::vector<Box> nonnegative_boxes(const ProblemSpec& spec) {
    const int dim = spec.domain.dim;
    const auto& dom = spec.domain.bounds;
    auto cuts = [&](int axis) {
        const auto& lim = axis == 0 ? dom.x : dom.y;
        std::set<double> c{lim[0], lim[1]};
        for (const auto& piece : spec.weight.pieces) {
            const auto& r = axis == 0 ? piece.region.x : piece.region.y;
            for (double t : r)
                if (t > lim[0] && t < lim[1]) c.insert(t);
        }
        return std::vector<double>(c.begin(), c.end());
    };
    const auto xs = cuts(0);
    const auto ys = dim == 2 ? cuts(1) : std::vector<double>{dom.y[0], dom.y[1]};

    std::vector<Box> out;
    bool all_nonneg = true;
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            Box cell{{xs[i], xs[i + 1]}, {ys[j], ys[j + 1]}};
            const double f = spec.weight(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]), dim);
            if (f >= 0.0) out.push_back(cell);
            else all_nonneg = false;
        }
    }
    if (all_nonneg && out.size() > 1) out.insert(out.begin(), dom);
    return out;
}

// ---------------------------------------------------------------------------
// YAML config

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

YAML::Node child(const YAML::Node& parent, const std::string& key, const std::string& path) {
    const auto full = path.empty() ? key : path + "." + key;
    if (!parent.IsMap()) throw ConfigError(path, line_of(parent), "expected a mapping");
    YAML::Node n = parent[key];
    if (!n) throw ConfigError(full, line_of(parent), "missing required key");
    return n;
}

double as_real(const YAML::Node& n, const std::string& path) {
    try {
        return n.as<double>();
    } catch (const YAML::Exception&) {
        throw ConfigError(path, line_of(n), "expected a real number");
    }
}

int as_int(const YAML::Node& n, const std::string& path) {
    try {
        return n.as<int>();
    } catch (const YAML::Exception&) {
        throw ConfigError(path, line_of(n), "expected an integer");
    }
}

void reject_unknown(const YAML::Node& n, std::initializer_list<const char*> known, const std::string& path) {
    for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw ConfigError(path.empty() ? key : path + "." + key, line_of(kv.first), "unknown key");
    }
}

Box parse_box(const YAML::Node& n, int dim, const std::string& path) {
    if (!n.IsSequence() || n.size() != static_cast<std::size_t>(2 * dim))
        throw ConfigError(path, line_of(n), dim == 1 ? "expected [a, b]" : "expected [a, b, c, d]");
    Box b;
    b.x = {as_real(n[0], path + "[0]"), as_real(n[1], path + "[1]")};
    if (dim == 2) b.y = {as_real(n[2], path + "[2]"), as_real(n[3], path + "[3]")};
    return b;
}

}  // namespace

ProblemSpec parse_problem(std::string_view text) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw ConfigError("", e.mark.line + 1, e.msg);
    }
    if (!root.IsMap()) throw ConfigError("", 1, "expected a mapping at the top level");
    reject_unknown(root, {"p", "q", "alpha", "beta", "c1", "c2", "domain", "resolution", "weight"}, "");

    ProblemSpec spec;
    spec.p = as_real(child(root, "p", ""), "p");
    spec.q = as_real(child(root, "q", ""), "q");
    spec.alpha = as_real(child(root, "alpha", ""), "alpha");
    spec.beta = as_real(child(root, "beta", ""), "beta");
    spec.c1 = as_real(child(root, "c1", ""), "c1");
    spec.c2 = as_real(child(root, "c2", ""), "c2");
    spec.resolution = as_int(child(root, "resolution", ""), "resolution");

    const auto dom = child(root, "domain", "");
    reject_unknown(dom, {"dim", "bounds"}, "domain");
    spec.domain.dim = as_int(child(dom, "dim", "domain"), "domain.dim");
    if (spec.domain.dim != 1 && spec.domain.dim != 2)
        throw ConfigError("domain.dim", line_of(dom["dim"]), "must be 1 or 2");
    spec.domain.bounds = parse_box(child(dom, "bounds", "domain"), spec.domain.dim, "domain.bounds");

    const auto w = child(root, "weight", "");
    reject_unknown(w, {"default", "pieces"}, "weight");
    spec.weight.default_value = as_real(child(w, "default", "weight"), "weight.default");
    if (const auto pieces = w["pieces"]) {
        if (!pieces.IsSequence()) throw ConfigError("weight.pieces", line_of(pieces), "expected a sequence");
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            const auto path = "weight.pieces[" + std::to_string(i) + "]";
            reject_unknown(pieces[i], {"box", "value"}, path);
            WeightPiece piece;
            piece.region = parse_box(child(pieces[i], "box", path), spec.domain.dim, path + ".box");
            piece.value = as_real(child(pieces[i], "value", path), path + ".value");
            spec.weight.pieces.push_back(piece);
        }
    }
    return spec;
}

ProblemSpec load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", 0, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_problem(ss.str());
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string box_text(const Box& b, int dim) {
    std::string s = "[" + num(b.x[0]) + ", " + num(b.x[1]);
    if (dim == 2) s += ", " + num(b.y[0]) + ", " + num(b.y[1]);
    return s + "]";
}

}  // namespace

std::string to_yaml(const ProblemSpec& spec) {
    const int dim = spec.domain.dim;
    std::string s;
    s += "p: " + num(spec.p) + "\n";
    s += "q: " + num(spec.q) + "\n";
    s += "alpha: " + num(spec.alpha) + "\n";
    s += "beta: " + num(spec.beta) + "\n";
    s += "c1: " + num(spec.c1) + "\n";
    s += "c2: " + num(spec.c2) + "\n";
    s += "domain:\n  dim: " + std::to_string(dim) + "\n  bounds: " + box_text(spec.domain.bounds, dim) + "\n";
    s += "resolution: " + std::to_string(spec.resolution) + "\n";
    s += "weight:\n  default: " + num(spec.weight.default_value) + "\n";
    if (!spec.weight.pieces.empty()) {
        s += "  pieces:\n";
        for (const auto& piece : spec.weight.pieces)
            s += "    - box: " + box_text(piece.region, dim) + "\n      value: " + num(piece.value) + "\n";
    }
    return s;
}

std::uint64_t problem_hash(const ProblemSpec& spec) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : to_yaml(spec)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace plapsys
