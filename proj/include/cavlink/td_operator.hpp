// td_operator.hpp: harmonic time-dependent operators H(t) = sum_k amp_k e^{i w_k t} A_k

#pragma once

#include "cavlink/hilbert.hpp"

#include <map>

namespace cavlink {

class TimeDependentOperator {
public:
    struct Term {
        double frequency;  // w_k in e^{i w_k t}
        SpMat op;          // amplitude already folded in
    };

    TimeDependentOperator() = default;
    explicit TimeDependentOperator(hilbert::HilbertLayout layout) : layout_(std::move(layout)) {}

    const hilbert::HilbertLayout& layout() const { return layout_; }
    const std::vector<Term>& terms() const { return terms_; }
    std::size_t dim() const { return layout_.total_dim(); }

    // Adds amp * e^{i w t} * op; terms sharing a frequency are merged.
    void add(cplx amp, double frequency, const SpMat& op) {
        if (static_cast<std::size_t>(op.rows()) != layout_.total_dim())
            throw std::invalid_argument("TimeDependentOperator::add: operator dimension mismatch");
        if (amp == cplx{0.0, 0.0}) return;
        for (auto& t : terms_) {
            if (t.frequency == frequency) {
                t.op += amp * op;
                t.op.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return v != cplx{0.0, 0.0}; });
                return;
            }
        }
        SpMat scaled = amp * op;
        scaled.makeCompressed();
        terms_.push_back({frequency, std::move(scaled)});
    }

    void add(cplx amp, double frequency, const hilbert::SparseOperator& op) {
        if (!(op.layout == layout_)) throw std::invalid_argument("TimeDependentOperator::add: layout mismatch");
        add(amp, frequency, op.matrix);
    }

    // Adds amp e^{iwt} op + h.c.
    void add_hermitian_pair(cplx amp, double frequency, const SpMat& op) {
        add(amp, frequency, op);
        add(std::conj(amp), -frequency, SpMat(op.adjoint()));
    }

    void add_hermitian_pair(cplx amp, double frequency, const hilbert::SparseOperator& op) {
        add_hermitian_pair(amp, frequency, op.matrix);
    }

    TimeDependentOperator& operator+=(const TimeDependentOperator& o) {
        if (!(o.layout_ == layout_)) throw std::invalid_argument("TimeDependentOperator: layout mismatch");
        for (const auto& t : o.terms_) add(1.0, t.frequency, t.op);
        return *this;
    }

    hilbert::SparseOperator at(double t) const {
        const auto n = static_cast<Eigen::Index>(layout_.total_dim());
        SpMat m(n, n);
        for (const auto& term : terms_) m += coefficient(term, t) * term.op;
        return {layout_, std::move(m)};
    }

    // y = H(t) x
    void apply(double t, const Vec& x, Vec& y) const {
        y.setZero(x.size());
        for (const auto& term : terms_) y.noalias() += coefficient(term, t) * (term.op * x);
    }

    // y = H(t) X for a dense block of columns
    void apply(double t, const Mat& x, Mat& y) const {
        y.setZero(x.rows(), x.cols());
        for (const auto& term : terms_) y.noalias() += coefficient(term, t) * (term.op * x);
    }

    // Largest rate present: max |w_k| and the infinity-norm bound sum_k ||A_k||_inf.
    double max_rate() const {
        double w = 0.0, norm = 0.0;
        for (const auto& term : terms_) {
            w = std::max(w, std::abs(term.frequency));
            norm += row_sum_norm(term.op);
        }
        return std::max(w, norm);
    }

    bool empty() const { return terms_.empty(); }

private:
    static cplx coefficient(const Term& term, double t) {
        return term.frequency == 0.0 ? cplx{1.0, 0.0} : std::exp(I * (term.frequency * t));
    }

    static double row_sum_norm(const SpMat& m) {
        double r = 0.0;
        for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
            double s = 0.0;
            for (SpMat::InnerIterator it(m, i); it; ++it) s += std::abs(it.value());
            r = std::max(r, s);
        }
        return r;
    }

    hilbert::HilbertLayout layout_;
    std::vector<Term> terms_;
};

}  // namespace cavlink
