// hilbert.hpp: tensor-product layouts, Dicke and bosonic ladder operators, operator embedding
//
// Conventions:
//   * Dicke factor of N atoms has dimension N+1, basis |J,M>, J=N/2, ordered M=-J..+J.
//     Index 0 is |0...0> (all atoms in |0>), index N is |1...1>.
//   * Boson factor with cutoff n_max has dimension n_max+1, basis |n>, n=0..n_max.
//   * Three-level factor (single atom) has basis |0>,|1>,|e> at indices 0,1,2.
//   * Flat index is factor-major with the FIRST factor varying slowest.

#pragma once

#include "cavlink/linalg.hpp"

#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>

namespace cavlink::hilbert {

enum class FactorKind { dicke, boson, level3 };

struct Factor {
    FactorKind kind;
    int size;  // atom count (dicke), Fock cutoff (boson), unused (level3)
    std::string label;

    std::size_t dim() const {
        switch (kind) {
            case FactorKind::dicke: return static_cast<std::size_t>(size) + 1;
            case FactorKind::boson: return static_cast<std::size_t>(size) + 1;
            case FactorKind::level3: return 3;
        }
        return 0;
    }

    friend bool operator==(const Factor&, const Factor&) = default;
};

inline Factor dicke(int atoms, std::string label) { return {FactorKind::dicke, atoms, std::move(label)}; }
inline Factor boson(int n_max, std::string label) { return {FactorKind::boson, n_max, std::move(label)}; }
inline Factor level3(std::string label) { return {FactorKind::level3, 1, std::move(label)}; }

class HilbertLayout {
public:
    HilbertLayout() = default;

    explicit HilbertLayout(std::vector<Factor> factors) : factors_(std::move(factors)) {
        if (factors_.empty()) throw std::invalid_argument("HilbertLayout: no factors");
        for (std::size_t i = 0; i < factors_.size(); ++i) {
            const auto& f = factors_[i];
            if (f.kind == FactorKind::dicke && f.size < 1)
                throw std::invalid_argument("HilbertLayout: dicke factor '" + f.label + "' needs N >= 1");
            if (f.kind == FactorKind::boson && f.size < 1)
                throw std::invalid_argument("HilbertLayout: boson factor '" + f.label + "' needs n_max >= 1");
            for (std::size_t j = 0; j < i; ++j)
                if (factors_[j].label == f.label)
                    throw std::invalid_argument("HilbertLayout: duplicate label '" + f.label + "'");
        }
        total_ = 1;
        for (const auto& f : factors_) total_ *= f.dim();
    }

    const std::vector<Factor>& factors() const { return factors_; }
    std::size_t size() const { return factors_.size(); }
    std::size_t total_dim() const { return total_; }
    std::size_t dim(std::size_t slot) const { return factors_.at(slot).dim(); }
    const Factor& factor(std::size_t slot) const { return factors_.at(slot); }

    std::optional<std::size_t> find(const std::string& label) const {
        for (std::size_t i = 0; i < factors_.size(); ++i)
            if (factors_[i].label == label) return i;
        return std::nullopt;
    }

    std::size_t slot(const std::string& label) const {
        if (auto s = find(label)) return *s;
        throw std::invalid_argument("HilbertLayout: unknown factor label '" + label + "'");
    }

    bool has(const std::string& label) const { return find(label).has_value(); }

    std::size_t index(const std::vector<std::size_t>& multi) const {
        if (multi.size() != factors_.size())
            throw std::invalid_argument("HilbertLayout::index: multi-index has wrong length");
        std::size_t idx = 0;
        for (std::size_t i = 0; i < factors_.size(); ++i) {
            if (multi[i] >= factors_[i].dim())
                throw std::out_of_range("HilbertLayout::index: component out of range");
            idx = idx * factors_[i].dim() + multi[i];
        }
        return idx;
    }

    std::vector<std::size_t> multi_index(std::size_t idx) const {
        if (idx >= total_) throw std::out_of_range("HilbertLayout::multi_index: index out of range");
        std::vector<std::size_t> m(factors_.size());
        for (std::size_t i = factors_.size(); i-- > 0;) {
            m[i] = idx % factors_[i].dim();
            idx /= factors_[i].dim();
        }
        return m;
    }

    // Product of dimensions of factors strictly after `slot`.
    std::size_t stride(std::size_t slot) const {
        std::size_t s = 1;
        for (std::size_t i = slot + 1; i < factors_.size(); ++i) s *= factors_[i].dim();
        return s;
    }

    friend bool operator==(const HilbertLayout& a, const HilbertLayout& b) { return a.factors_ == b.factors_; }

private:
    std::vector<Factor> factors_;
    std::size_t total_ = 0;
};

struct SparseOperator {
    HilbertLayout layout;
    SpMat matrix;

    SparseOperator() = default;
    SparseOperator(HilbertLayout l, SpMat m) : layout(std::move(l)), matrix(std::move(m)) {
        if (static_cast<std::size_t>(matrix.rows()) != layout.total_dim() || matrix.rows() != matrix.cols())
            throw std::invalid_argument("SparseOperator: matrix shape does not match layout");
        matrix.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return v != cplx{0.0, 0.0}; });
        matrix.makeCompressed();
    }

    static SparseOperator zero(const HilbertLayout& l) {
        const auto n = static_cast<Eigen::Index>(l.total_dim());
        return {l, SpMat(n, n)};
    }

    static SparseOperator identity(const HilbertLayout& l) {
        return {l, sparse_identity(static_cast<Eigen::Index>(l.total_dim()))};
    }

    std::size_t dim() const { return layout.total_dim(); }
    Eigen::Index non_zeros() const { return matrix.nonZeros(); }
    double hermiticity_error() const { return cavlink::hermiticity_error(matrix); }
    Mat dense() const { return Mat(matrix); }
    SparseOperator adjoint() const { return {layout, SpMat(matrix.adjoint())}; }

    // Stored entries in (row, col) lexicographic order.
    std::vector<Triplet> entries() const {
        std::vector<Triplet> out;
        out.reserve(static_cast<std::size_t>(matrix.nonZeros()));
        for (Eigen::Index r = 0; r < matrix.outerSize(); ++r)
            for (SpMat::InnerIterator it(matrix, r); it; ++it) out.emplace_back(it.row(), it.col(), it.value());
        return out;
    }

    cplx element(std::size_t row, std::size_t col) const {
        return matrix.coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
    }

    SparseOperator& operator+=(const SparseOperator& o) {
        require_same(o);
        matrix += o.matrix;
        return *this;
    }

    friend SparseOperator operator+(SparseOperator a, const SparseOperator& b) { return a += b; }
    friend SparseOperator operator-(const SparseOperator& a, const SparseOperator& b) {
        a.require_same(b);
        return {a.layout, SpMat(a.matrix - b.matrix)};
    }
    friend SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
        a.require_same(b);
        return {a.layout, SpMat(a.matrix * b.matrix)};
    }
    friend SparseOperator operator*(cplx s, const SparseOperator& a) { return {a.layout, SpMat(s * a.matrix)}; }

private:
    void require_same(const SparseOperator& o) const {
        if (!(layout == o.layout)) throw std::invalid_argument("SparseOperator: layout mismatch");
    }
};

inline SparseOperator commutator(const SparseOperator& a, const SparseOperator& b) { return a * b - b * a; }

struct StateVector {
    HilbertLayout layout;
    Vec amplitudes;

    StateVector() = default;
    StateVector(HilbertLayout l, Vec amps) : layout(std::move(l)), amplitudes(std::move(amps)) {
        if (static_cast<std::size_t>(amplitudes.size()) != layout.total_dim())
            throw std::invalid_argument("StateVector: amplitude count does not match layout");
    }

    // Normalizes the given amplitudes; throws on a zero vector.
    static StateVector normalized(HilbertLayout l, Vec amps) {
        const double n = amps.norm();
        if (!(n > 0.0)) throw std::invalid_argument("StateVector: zero vector cannot be normalized");
        return {std::move(l), amps / n};
    }

    static StateVector basis(const HilbertLayout& l, const std::vector<std::size_t>& multi) {
        Vec v = Vec::Zero(static_cast<Eigen::Index>(l.total_dim()));
        v(static_cast<Eigen::Index>(l.index(multi))) = 1.0;
        return {l, v};
    }

    double norm() const { return amplitudes.norm(); }
    std::size_t dim() const { return layout.total_dim(); }
};

struct DensityMatrix {
    HilbertLayout layout;
    Mat matrix;

    DensityMatrix() = default;
    DensityMatrix(HilbertLayout l, Mat m) : layout(std::move(l)), matrix(std::move(m)) {
        if (static_cast<std::size_t>(matrix.rows()) != layout.total_dim() || matrix.rows() != matrix.cols())
            throw std::invalid_argument("DensityMatrix: matrix shape does not match layout");
    }

    static DensityMatrix pure(const StateVector& psi) {
        return {psi.layout, psi.amplitudes * psi.amplitudes.adjoint()};
    }

    cplx trace() const { return matrix.trace(); }
    double min_eigenvalue() const { return hermitian_eigenvalues(0.5 * (matrix + matrix.adjoint())).minCoeff(); }
};

// ---------------------------------------------------------------- single-factor operators

struct DickeOps {
    SpMat S_plus, S_minus, S_z, S_x;
};

inline DickeOps dicke_ops(int atoms) {
    if (atoms < 1) throw std::invalid_argument("dicke_ops: N must be >= 1 (empty cloud)");
    const int d = atoms + 1;
    const double J = 0.5 * atoms;
    std::vector<Triplet> plus, z;
    for (int i = 0; i < d; ++i) {
        const double M = -J + i;
        z.emplace_back(i, i, M);
        if (i + 1 < d) plus.emplace_back(i + 1, i, std::sqrt(J * (J + 1) - M * (M + 1)));
    }
    DickeOps ops;
    ops.S_plus = sparse_from_triplets(d, d, plus);
    ops.S_minus = SpMat(ops.S_plus.adjoint());
    ops.S_z = sparse_from_triplets(d, d, z);
    ops.S_x = ops.S_plus + ops.S_minus;
    return ops;
}

struct BosonOps {
    SpMat a, a_dag, n;
};

inline BosonOps boson_ops(int n_max) {
    if (n_max < 1) throw std::invalid_argument("boson_ops: n_max must be >= 1");
    const int d = n_max + 1;
    std::vector<Triplet> a, n;
    for (int k = 0; k < d; ++k) {
        n.emplace_back(k, k, static_cast<double>(k));
        if (k >= 1) a.emplace_back(k - 1, k, std::sqrt(static_cast<double>(k)));
    }
    BosonOps ops;
    ops.a = sparse_from_triplets(d, d, a);
    ops.a_dag = SpMat(ops.a.adjoint());
    ops.n = sparse_from_triplets(d, d, n);
    return ops;
}

// |i><j| on a three-level atom.
inline SpMat level3_projector(int i, int j) { return sparse_from_triplets(3, 3, {Triplet(i, j, 1.0)}); }

// Eigenbasis of S_x = S+ + S- with eigenvalues 2*M_x ascending (M_x = -J..+J).
struct XBasis {
    RVec eigenvalues;
    Mat vectors;  // column k is |M_x = -J + k> expressed in the z basis

    // <M_x | M_z> by basis index.
    cplx coeff(std::size_t mx, std::size_t mz) const {
        return std::conj(vectors(static_cast<Eigen::Index>(mz), static_cast<Eigen::Index>(mx)));
    }
};

inline XBasis x_basis(int atoms) {
    const DickeOps ops = dicke_ops(atoms);
    Eigen::SelfAdjointEigenSolver<Mat> es{Mat(ops.S_x)};
    if (es.info() != Eigen::Success) throw std::runtime_error("x_basis: eigensolver failed");
    XBasis xb{es.eigenvalues(), es.eigenvectors()};
    for (Eigen::Index k = 0; k < xb.vectors.cols(); ++k) {
        for (Eigen::Index r = 0; r < xb.vectors.rows(); ++r) {
            const cplx v = xb.vectors(r, k);
            if (std::abs(v) > 1e-12) {
                xb.vectors.col(k) *= std::abs(v) / v;
                break;
            }
        }
        // S_x is real symmetric; drop residual imaginary noise left by the solver.
        xb.vectors.col(k) = xb.vectors.col(k).real().cast<cplx>();
        xb.eigenvalues(k) = std::round(xb.eigenvalues(k));
    }
    return xb;
}

// ---------------------------------------------------------------- embedding

inline SparseOperator embed(const SpMat& op, const std::string& label, const HilbertLayout& layout) {
    const std::size_t s = layout.slot(label);
    const auto d = static_cast<Eigen::Index>(layout.dim(s));
    if (op.rows() != d || op.cols() != d)
        throw std::invalid_argument("embed: operator dimension does not match factor '" + label + "'");
    std::size_t left = 1;
    for (std::size_t i = 0; i < s; ++i) left *= layout.dim(i);
    const std::size_t right = layout.stride(s);
    SpMat m = kron(kron(sparse_identity(static_cast<Eigen::Index>(left)), op),
                   sparse_identity(static_cast<Eigen::Index>(right)));
    return {layout, std::move(m)};
}

// Embeds a dense operator acting on a contiguous run of factors starting at `first`.
inline Mat embed_dense_block(const Mat& op, std::size_t first, std::size_t count, const HilbertLayout& layout) {
    std::size_t left = 1, mid = 1;
    for (std::size_t i = 0; i < first; ++i) left *= layout.dim(i);
    for (std::size_t i = first; i < first + count; ++i) mid *= layout.dim(i);
    if (static_cast<std::size_t>(op.rows()) != mid)
        throw std::invalid_argument("embed_dense_block: operator dimension mismatch");
    const std::size_t right = layout.total_dim() / (left * mid);
    return kron(kron(Mat::Identity(static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(left)), op),
                Mat::Identity(static_cast<Eigen::Index>(right), static_cast<Eigen::Index>(right)));
}

}  // namespace cavlink::hilbert
