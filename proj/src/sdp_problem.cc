#include "sosctrl/sdp.h"

#include <cctype>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace sosctrl {
namespace {

void CheckTerm(const SdpProblem& problem, const SdpProblem::Term& term,
               const std::string& where) {
  if (term.block == SdpProblem::kNonnegBlock) {
    SOSCTRL_REQUIRE(term.row == term.col,
                    where + ": nonnegative-block term must be diagonal");
    SOSCTRL_REQUIRE(term.row >= 0 && term.row < problem.nonneg_dim,
                    where + ": nonnegative-block index out of range");
    return;
  }
  if (term.block == SdpProblem::kFreeBlock) {
    SOSCTRL_REQUIRE(term.row == term.col,
                    where + ": free-block term must be diagonal");
    SOSCTRL_REQUIRE(term.row >= 0 && term.row < problem.free_dim,
                    where + ": free-block index out of range");
    return;
  }
  SOSCTRL_REQUIRE(term.block >= 0 && term.block < problem.num_psd_blocks(),
                  where + ": PSD block index out of range");
  const int dim = problem.psd_dims[term.block];
  SOSCTRL_REQUIRE(term.row >= 0 && term.col >= 0 && term.row < dim &&
                      term.col < dim,
                  where + ": PSD entry index out of range");
  SOSCTRL_REQUIRE(term.row <= term.col,
                  where + ": PSD entries must be upper-triangle");
}

std::string FormatDouble(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace

void SdpProblem::AddObjectiveTerm(int block, int row, int col, double value) {
  if (row > col) std::swap(row, col);
  objective.push_back(Term{block, row, col, value});
}

void SdpProblem::AddConstraintTerm(int constraint, int block, int row, int col,
                                   double value) {
  SOSCTRL_REQUIRE(constraint >= 0 && constraint < num_constraints(),
                  "constraint index out of range");
  if (row > col) std::swap(row, col);
  constraints[constraint].push_back(Term{block, row, col, value});
}

int SdpProblem::AddConstraint(double rhs) {
  constraints.emplace_back();
  Eigen::VectorXd extended(b.size() + 1);
  extended.head(b.size()) = b;
  extended(b.size()) = rhs;
  b = std::move(extended);
  return num_constraints() - 1;
}

void SdpProblem::Validate() const {
  SOSCTRL_REQUIRE(nonneg_dim >= 0 && free_dim >= 0,
                  "block dimensions must be nonnegative");
  for (const int dim : psd_dims) {
    SOSCTRL_REQUIRE(dim >= 1, "PSD block dimensions must be positive");
  }
  SOSCTRL_REQUIRE(b.size() == num_constraints(),
                  "right-hand side length must match constraint count");
  for (const Term& term : objective) CheckTerm(*this, term, "objective");
  for (int i = 0; i < num_constraints(); ++i) {
    for (const Term& term : constraints[i]) {
      CheckTerm(*this, term, "constraint " + std::to_string(i));
    }
  }
}

namespace {

std::vector<Eigen::MatrixXd> DensifyPsd(const SdpProblem& problem,
                                        const std::vector<SdpProblem::Term>& terms) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(problem.psd_dims.size());
  for (const int dim : problem.psd_dims) {
    blocks.push_back(Eigen::MatrixXd::Zero(dim, dim));
  }
  for (const SdpProblem::Term& term : terms) {
    if (term.block < 0) continue;
    blocks[term.block](term.row, term.col) += term.value;
    if (term.row != term.col) {
      blocks[term.block](term.col, term.row) += term.value;
    }
  }
  return blocks;
}

}  // namespace

std::vector<Eigen::MatrixXd> SdpProblem::DenseObjectivePsd() const {
  return DensifyPsd(*this, objective);
}

std::vector<Eigen::MatrixXd> SdpProblem::DenseConstraintPsd(
    int constraint) const {
  SOSCTRL_REQUIRE(constraint >= 0 && constraint < num_constraints(),
                  "constraint index out of range");
  return DensifyPsd(*this, constraints[constraint]);
}

Eigen::VectorXd SdpProblem::DenseVector(const std::vector<Term>& terms,
                                        int block, int dim) const {
  Eigen::VectorXd result = Eigen::VectorXd::Zero(dim);
  for (const Term& term : terms) {
    if (term.block == block) result(term.row) += term.value;
  }
  return result;
}

std::string ToString(SdpStatus status) {
  switch (status) {
    case SdpStatus::kOptimal:
      return "Optimal";
    case SdpStatus::kInfeasible:
      return "Infeasible";
    case SdpStatus::kUnbounded:
      return "Unbounded";
    case SdpStatus::kSlowProgress:
      return "SlowProgress";
    case SdpStatus::kIterationLimit:
      return "IterationLimit";
  }
  return "Unknown";
}

// --- SDPA export -----------------------------------------------------------

namespace {

// Block layout of the exported file: PSD blocks first, then one diagonal
// block holding [nonneg; free+; free-] whenever either part is present.
struct SdpaLayout {
  int num_file_blocks{0};
  int diag_dim{0};  // size of the trailing diagonal block, 0 if absent
};

SdpaLayout LayoutOf(const SdpProblem& problem) {
  SdpaLayout layout;
  layout.diag_dim = problem.nonneg_dim + 2 * problem.free_dim;
  layout.num_file_blocks =
      problem.num_psd_blocks() + (layout.diag_dim > 0 ? 1 : 0);
  return layout;
}

// matno: 0 for the objective matrix F_0 = -C, i for A_i. The sign flip on
// F_0 is what makes the file's dual problem coincide with our primal.
void AppendEntries(std::ostream& out, const SdpProblem& problem, int matno,
                   const std::vector<SdpProblem::Term>& terms, double scale) {
  const int diag_block = problem.num_psd_blocks() + 1;  // 1-based
  for (const SdpProblem::Term& term : terms) {
    if (term.value == 0.0) continue;
    if (term.block >= 0) {
      out << matno << ' ' << term.block + 1 << ' ' << term.row + 1 << ' '
          << term.col + 1 << ' ' << FormatDouble(scale * term.value) << '\n';
    } else if (term.block == SdpProblem::kNonnegBlock) {
      const int idx = term.row + 1;
      out << matno << ' ' << diag_block << ' ' << idx << ' ' << idx << ' '
          << FormatDouble(scale * term.value) << '\n';
    } else {
      const int plus = problem.nonneg_dim + 2 * term.row + 1;
      out << matno << ' ' << diag_block << ' ' << plus << ' ' << plus << ' '
          << FormatDouble(scale * term.value) << '\n';
      out << matno << ' ' << diag_block << ' ' << plus + 1 << ' ' << plus + 1
          << ' ' << FormatDouble(-scale * term.value) << '\n';
    }
  }
}

}  // namespace

std::string ExportSdpa(const SdpProblem& problem) {
  problem.Validate();
  const SdpaLayout layout = LayoutOf(problem);
  SOSCTRL_REQUIRE(layout.num_file_blocks > 0,
                  "cannot export a problem with no blocks");
  std::ostringstream out;
  out << problem.num_constraints() << '\n';
  out << layout.num_file_blocks << '\n';
  for (int k = 0; k < problem.num_psd_blocks(); ++k) {
    out << problem.psd_dims[k] << (k + 1 < layout.num_file_blocks ? " " : "");
  }
  if (layout.diag_dim > 0) out << -layout.diag_dim;
  out << '\n';
  for (int i = 0; i < problem.num_constraints(); ++i) {
    out << FormatDouble(problem.b(i)) << (i + 1 < problem.num_constraints() ? " " : "");
  }
  out << '\n';
  AppendEntries(out, problem, 0, problem.objective, -1.0);
  for (int i = 0; i < problem.num_constraints(); ++i) {
    AppendEntries(out, problem, i + 1, problem.constraints[i], 1.0);
  }
  return out.str();
}

// --- SDPA import -----------------------------------------------------------

namespace {

class SdpaReader {
 public:
  explicit SdpaReader(const std::string& text) : stream_(text) {}

  // Reads the next whitespace-separated token, skipping comment lines and
  // treating SDPA punctuation ({ } ( ) ,) as whitespace.
  bool NextToken(std::string* token) {
    for (;;) {
      if (pos_ >= line_.size()) {
        if (!std::getline(stream_, line_)) return false;
        ++line_number_;
        pos_ = 0;
        if (!line_.empty() && (line_[0] == '*' || line_[0] == '"')) {
          pos_ = line_.size();
          continue;
        }
      }
      while (pos_ < line_.size() && IsSeparator(line_[pos_])) ++pos_;
      if (pos_ >= line_.size()) continue;
      const size_t start = pos_;
      while (pos_ < line_.size() && !IsSeparator(line_[pos_])) ++pos_;
      *token = line_.substr(start, pos_ - start);
      return true;
    }
  }

  int NextInt(const std::string& what) {
    const std::string token = Demand(what);
    try {
      size_t used = 0;
      const int value = std::stoi(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      return value;
    } catch (const std::exception&) {
      Fail("expected integer for " + what + ", got \"" + token + "\"");
    }
    return 0;
  }

  double NextDouble(const std::string& what) {
    const std::string token = Demand(what);
    try {
      size_t used = 0;
      const double value = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      return value;
    } catch (const std::exception&) {
      Fail("expected number for " + what + ", got \"" + token + "\"");
    }
    return 0.0;
  }

  [[noreturn]] void Fail(const std::string& message) const {
    throw std::invalid_argument("SDPA import error at line " +
                                std::to_string(line_number_) + ": " + message);
  }

  int line_number() const { return line_number_; }

 private:
  static bool IsSeparator(char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == ',' ||
           c == '{' || c == '}' || c == '(' || c == ')';
  }

  std::string Demand(const std::string& what) {
    std::string token;
    if (!NextToken(&token)) Fail("unexpected end of file, expected " + what);
    return token;
  }

  std::istringstream stream_;
  std::string line_;
  size_t pos_{0};
  int line_number_{0};
};

}  // namespace

SdpProblem ImportSdpa(const std::string& text) {
  SdpaReader reader(text);
  const int m = reader.NextInt("constraint count");
  if (m < 0) reader.Fail("constraint count must be nonnegative");
  const int nblocks = reader.NextInt("block count");
  if (nblocks <= 0) reader.Fail("block count must be positive");

  SdpProblem problem;
  // file block -> (problem block id, offset within nonneg block)
  std::vector<int> block_id(nblocks);
  std::vector<int> block_dim(nblocks);
  std::vector<int> diag_offset(nblocks, 0);
  int nonneg_total = 0;
  for (int k = 0; k < nblocks; ++k) {
    const int size = reader.NextInt("block size");
    if (size == 0) reader.Fail("block size must be nonzero");
    if (size > 0) {
      block_id[k] = problem.num_psd_blocks();
      block_dim[k] = size;
      problem.psd_dims.push_back(size);
    } else {
      block_id[k] = SdpProblem::kNonnegBlock;
      block_dim[k] = -size;
      diag_offset[k] = nonneg_total;
      nonneg_total += -size;
    }
  }
  problem.nonneg_dim = nonneg_total;
  problem.b.resize(m);
  problem.constraints.resize(m);
  for (int i = 0; i < m; ++i) problem.b(i) = reader.NextDouble("rhs value");

  std::string token;
  while (true) {
    // Peek for end of stream via NextToken on the matno position.
    if (!reader.NextToken(&token)) break;
    int matno = 0;
    try {
      size_t used = 0;
      matno = std::stoi(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      reader.Fail("expected matrix number, got \"" + token + "\"");
    }
    const int blkno = reader.NextInt("block number");
    const int i = reader.NextInt("row index");
    const int j = reader.NextInt("column index");
    const double value = reader.NextDouble("entry value");
    if (matno < 0 || matno > m) reader.Fail("matrix number out of range");
    if (blkno < 1 || blkno > nblocks) reader.Fail("block number out of range");
    const int dim = block_dim[blkno - 1];
    if (i < 1 || j < 1 || i > dim || j > dim) {
      reader.Fail("entry index out of range for block " +
                  std::to_string(blkno));
    }
    if (i > j) {
      reader.Fail("entry below the diagonal (row " + std::to_string(i) +
                  " > column " + std::to_string(j) + ")");
    }
    const int id = block_id[blkno - 1];
    const bool is_diag = id == SdpProblem::kNonnegBlock;
    if (is_diag && i != j) reader.Fail("off-diagonal entry in diagonal block");
    const int row = is_diag ? diag_offset[blkno - 1] + i - 1 : i - 1;
    const int col = is_diag ? row : j - 1;
    // F_0 = -C in the file, so objective entries flip sign on the way in.
    if (matno == 0) {
      problem.AddObjectiveTerm(id, row, col, -value);
    } else {
      problem.AddConstraintTerm(matno - 1, id, row, col, value);
    }
  }
  problem.Validate();
  return problem;
}

// --- solution import -------------------------------------------------------

SdpSolution ImportSolutionText(const SdpProblem& problem,
                               const std::string& text) {
  problem.Validate();
  std::istringstream stream(text);
  auto next = [&stream](const std::string& what) {
    double value = 0.0;
    if (!(stream >> value)) {
      throw std::invalid_argument("solution import: missing value for " +
                                  what);
    }
    return value;
  };

  SdpSolution solution;
  const int m = problem.num_constraints();
  solution.y.resize(m);
  for (int i = 0; i < m; ++i) solution.y(i) = next("dual value");
  for (const int dim : problem.psd_dims) {
    Eigen::MatrixXd block(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = i; j < dim; ++j) {
        block(i, j) = next("PSD block entry");
        block(j, i) = block(i, j);
      }
    }
    solution.psd.push_back(std::move(block));
  }
  solution.nonneg.resize(problem.nonneg_dim);
  for (int i = 0; i < problem.nonneg_dim; ++i) {
    solution.nonneg(i) = next("nonnegative block entry");
  }
  solution.free.resize(problem.free_dim);
  for (int i = 0; i < problem.free_dim; ++i) {
    solution.free(i) = next("free block entry");
  }
  double extra = 0.0;
  if (stream >> extra) {
    throw std::invalid_argument("solution import: trailing values");
  }

  // Recompute objectives and residuals; the dual slack is C - A*(y).
  const std::vector<Eigen::MatrixXd> c_psd = problem.DenseObjectivePsd();
  const Eigen::VectorXd c_nn =
      problem.DenseVector(problem.objective, SdpProblem::kNonnegBlock,
                          problem.nonneg_dim);
  const Eigen::VectorXd c_free = problem.DenseVector(
      problem.objective, SdpProblem::kFreeBlock, problem.free_dim);

  solution.dual_psd = c_psd;
  solution.dual_nonneg = c_nn;
  double primal = c_free.dot(solution.free) + c_nn.dot(solution.nonneg);
  for (int k = 0; k < problem.num_psd_blocks(); ++k) {
    primal += (c_psd[k].array() * solution.psd[k].array()).sum();
  }
  double primal_residual = 0.0;
  Eigen::VectorXd free_slack = c_free;
  for (int i = 0; i < m; ++i) {
    const std::vector<Eigen::MatrixXd> a_psd = problem.DenseConstraintPsd(i);
    double lhs = 0.0;
    for (int k = 0; k < problem.num_psd_blocks(); ++k) {
      lhs += (a_psd[k].array() * solution.psd[k].array()).sum();
      solution.dual_psd[k] -= solution.y(i) * a_psd[k];
    }
    const Eigen::VectorXd a_nn = problem.DenseVector(
        problem.constraints[i], SdpProblem::kNonnegBlock, problem.nonneg_dim);
    const Eigen::VectorXd a_free = problem.DenseVector(
        problem.constraints[i], SdpProblem::kFreeBlock, problem.free_dim);
    lhs += a_nn.dot(solution.nonneg) + a_free.dot(solution.free);
    solution.dual_nonneg -= solution.y(i) * a_nn;
    free_slack -= solution.y(i) * a_free;
    primal_residual = std::max(primal_residual, std::abs(lhs - problem.b(i)));
  }
  solution.primal_objective = primal;
  solution.dual_objective = problem.b.dot(solution.y);
  solution.duality_gap = primal - solution.dual_objective;
  solution.primal_residual = primal_residual;
  solution.dual_residual = free_slack.size() > 0
                               ? free_slack.cwiseAbs().maxCoeff()
                               : 0.0;
  solution.status = SdpStatus::kOptimal;
  solution.message = "imported solution";
  return solution;
}

}  // namespace sosctrl
