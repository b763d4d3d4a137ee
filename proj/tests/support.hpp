#pragma once

#include <string>

#include "plapsys/problem.hpp"

namespace testing_support {

inline std::string config_path(const std::string& name) { return std::string(PLAPSYS_CONFIG_DIR) + "/" + name; }

/// Unit interval problem with a constant weight.
inline plapsys::ProblemSpec constant_weight_1d(double f, int resolution = 65, double p = 2.0, double q = 2.0,
                                               double alpha = 2.0, double beta = 2.0) {
    plapsys::ProblemSpec s;
    s.p = p;
    s.q = q;
    s.alpha = alpha;
    s.beta = beta;
    s.domain.dim = 1;
    s.resolution = resolution;
    s.weight.default_value = f;
    return s;
}

/// f = -1 on [0, cut), +1 on [cut, 1].
inline plapsys::ProblemSpec two_piece_1d(double cut = 0.75, int resolution = 65) {
    auto s = constant_weight_1d(-1.0, resolution);
    plapsys::WeightPiece piece;
    piece.region.x = {cut, 1.0};
    piece.value = 1.0;
    s.weight.pieces.push_back(piece);
    return s;
}

}  // namespace testing_support
