#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "pushest/graph.hpp"

namespace pushest {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class SingularSystem : public SolverError {
 public:
  using SolverError::SolverError;
};
class NonFiniteCost : public SolverError {
 public:
  using SolverError::SolverError;
};

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Column offsets of the free (non-fixed) variables, in key order.
class Ordering {
 public:
  Ordering() = default;
  explicit Ordering(const FactorGraph& graph, const Values& values);

  bool contains(const VariableKey& key) const { return offsets_.count(key) != 0; }
  int offset(const VariableKey& key) const { return offsets_.at(key); }
  int dim() const { return dim_; }
  const std::map<VariableKey, int>& offsets() const { return offsets_; }

 private:
  std::map<VariableKey, int> offsets_;
  int dim_ = 0;
};

/// Normal equations H dx = -g of the whitened problem, H = J^T J and g = J^T r.
struct NormalSystem {
  Ordering ordering;
  SparseMatrix hessian;
  Eigen::VectorXd gradient;
  double cost = 0.0;
  /// Residual-curvature term; empty unless requested from linearize.
  SparseMatrix curvature;
};

/// Factor kinds whose residual curvature enters the Hessian when `curvature` is set.
bool usesCurvature(FactorKind kind);

/// With `curvature`, also returns sum_k r_k * Hessian(r_k) of the curved factors (central
/// differences of their Jacobians); hessian + curvature is the Newton Hessian of those terms.
NormalSystem linearize(const FactorGraph& graph, const Values& values, bool curvature = false);

enum class LinearSolver { SparseCholesky, DenseCholesky };

struct GaussNewtonOptions {
  int maxIterations = 100;
  double relCostTol = 1e-9;
  double absGradTol = 1e-10;
  /// Converged once the cost is at or below this, i.e. residuals at round-off level.
  double absCostTol = 1e-20;
  /// Relative cost tolerance only stops once the step is also below this (inf-norm).
  double stepTol = 1e-10;
  /// Levenberg damping factors tried, in order, when a plain step increases the cost.
  std::vector<double> damping = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2};
  LinearSolver solver = LinearSolver::SparseCholesky;
  /// Tries a Newton step that includes the curvature of the contact and dynamics factors
  /// before the Gauss-Newton step; stiff factors otherwise leave a slow linear tail.
  bool curvature = true;
};

enum class Termination { GradientTolerance, CostTolerance, StepTolerance, NoDescent, MaxIterations };
std::string toString(Termination t);

struct SolveReport {
  int iterations = 0;
  double initialCost = 0.0;
  double finalCost = 0.0;
  bool converged = false;
  Termination termination = Termination::MaxIterations;
  /// Cost after each accepted iteration, starting with the initial cost.
  std::vector<double> costTrace;
  double finalGradientNorm = 0.0;  // inf-norm of J^T Sigma^-1 r
  int dampedSteps = 0;
};

struct SolveResult {
  Values values;
  SolveReport report;
};

/// Gauss-Newton with a Levenberg fallback on cost increase. Fixed variables keep their value.
/// Throws NonFiniteCost for a non-finite initial cost and SingularSystem if the normal
/// equations cannot be factorized even with the largest damping.
SolveResult gaussNewton(const FactorGraph& graph, const Values& init, const GaussNewtonOptions& options = {});

struct StagedSolveResult {
  Values values;
  /// One report per stage.
  std::vector<SolveReport> reports;
};

/// Solves the graph without its intersection factors, then the full graph from that solution.
/// The one-sided intersection penalty otherwise steers solves started from penetrating
/// initializations into poorer local minima. A single gaussNewton run when there are none.
StagedSolveResult solveStaged(const FactorGraph& graph, const Values& init, const GaussNewtonOptions& options = {});

/// Marginal covariance blocks of the free variables, i.e. blocks of H^-1.
class MarginalCovariances {
 public:
  /// Throws SingularSystem when H is not positive definite.
  MarginalCovariances(const FactorGraph& graph, const Values& values);
  MarginalCovariances(const MarginalCovariances&) = delete;
  MarginalCovariances& operator=(const MarginalCovariances&) = delete;

  /// Throws std::out_of_range for fixed or unknown keys.
  Eigen::MatrixXd marginal(const VariableKey& key) const;
  /// Joint covariance of several variables (in the given order).
  Eigen::MatrixXd joint(const std::vector<VariableKey>& keys) const;

 private:
  NormalSystem system_;
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>> llt_;
};

Eigen::MatrixXd marginalCovariance(const FactorGraph& graph, const Values& values, const VariableKey& key);

}  // namespace pushest
