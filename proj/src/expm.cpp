#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "elflow/errors.hpp"
#include "elflow/integrator.hpp"

namespace elflow {

Eigen::MatrixXd expm(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols()) throw DomainError("expm needs a square matrix");
    if (M.rows() > 16) throw DomainError("expm supports matrices up to 16x16");
    if (!M.allFinite()) throw DomainError("expm input has non-finite entries");
    if (M.size() == 0) return M;
    // Padé approximant with scaling and squaring (Higham 2005).
    return M.exp();
}

}  // namespace elflow
