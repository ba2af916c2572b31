#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "coset/numeric.hpp"

namespace coset {

namespace detail {

/// Orthonormalize the columns of a matrix, deciding the rank by singular
/// values against eps. Works over real and complex scalars.
template <typename Mat>
Mat orth_cols(const Mat& a, double eps) {
  if (a.cols() == 0) return Mat(a.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  double cut = eps * std::max(1.0, sv.size() ? sv(0) : 0.0);
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > cut) ++r;
  return svd.matrixU().leftCols(r);
}

/// Orthonormal basis of the kernel of a.
template <typename Mat>
Mat nullspace_cols(const Mat& a, double eps) {
  if (a.cols() == 0) return Mat(0, 0);
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double cut = eps * std::max(1.0, sv.size() ? sv(0) : 0.0);
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > cut) ++r;
  return svd.matrixV().rightCols(a.cols() - r);
}

/// Intersection of two column spaces (columns assumed orthonormal): kernel
/// vectors (u;v) of [A -B] satisfy Au = Bv, and Au spans the intersection.
template <typename Mat>
Mat intersect_cols(const Mat& a, const Mat& b, double eps) {
  if (a.cols() == 0 || b.cols() == 0) return Mat(a.rows(), 0);
  Mat stacked(a.rows(), a.cols() + b.cols());
  stacked << a, -b;
  Mat ker = nullspace_cols(stacked, eps);
  if (ker.cols() == 0) return Mat(a.rows(), 0);
  Mat inter = a * ker.topRows(a.cols());
  return orth_cols(inter, eps);
}

template <typename Mat>
Mat sum_cols(const Mat& a, const Mat& b, double eps) {
  Mat stacked(a.rows(), a.cols() + b.cols());
  stacked << a, b;
  return orth_cols(stacked, eps);
}

/// Columns of amb orthogonal to the column space of a.
template <typename Mat>
Mat complement_in_cols(const Mat& a, const Mat& amb, double eps) {
  if (amb.cols() == 0) return Mat(amb.rows(), 0);
  Mat proj = amb - a * (a.adjoint() * amb);
  return orth_cols(proj, eps);
}

/// Spectral-norm distance between two column spaces (orthonormal columns).
template <typename Mat>
double subspace_distance_cols(const Mat& a, const Mat& b) {
  Mat pa = a * a.adjoint();
  Mat pb = b * b.adjoint();
  Eigen::JacobiSVD<Mat> svd(pa - pb);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

}  // namespace detail

/// Vectorize an N x N complex matrix into R^(2N^2): real parts then
/// imaginary parts, column-major.
inline Eigen::VectorXd vec_real(const CMatrix& m) {
  const Eigen::Index n2 = m.size();
  Eigen::VectorXd v(2 * n2);
  v.head(n2) = Eigen::Map<const Eigen::VectorXcd>(m.data(), n2).real();
  v.tail(n2) = Eigen::Map<const Eigen::VectorXcd>(m.data(), n2).imag();
  return v;
}

inline CMatrix unvec_real(const Eigen::VectorXd& v, Eigen::Index n) {
  const Eigen::Index n2 = n * n;
  Eigen::VectorXcd w =
      v.head(n2).cast<complexd>() + complexd(0, 1) * v.tail(n2).cast<complexd>();
  return Eigen::Map<const CMatrix>(w.data(), n, n);
}

/// A real subspace of gl(N,C) viewed as R^(2N^2), carried with an
/// orthonormal basis for the inner product <X,Y> = Re tr(X conj(Y)^T).
/// Rank decisions are made once at construction and never revisited.
class RealSubspace {
 public:
  RealSubspace() = default;

  static RealSubspace zero(Eigen::Index n) {
    RealSubspace s;
    s.n_ = n;
    s.coords_ = Eigen::MatrixXd(2 * n * n, 0);
    return s;
  }

  /// Orthonormalized span of the given matrices.
  static RealSubspace span_of(const std::vector<CMatrix>& gens,
                              double eps_rank) {
    if (gens.empty()) throw AmbientMismatch("span_of: no generators");
    RealSubspace s;
    s.n_ = gens[0].rows();
    Eigen::MatrixXd raw(2 * s.n_ * s.n_, static_cast<Eigen::Index>(gens.size()));
    for (size_t i = 0; i < gens.size(); ++i) {
      if (gens[i].rows() != s.n_ || gens[i].cols() != s.n_)
        throw AmbientMismatch("span_of: mixed ambient sizes");
      raw.col(static_cast<Eigen::Index>(i)) = vec_real(gens[i]);
    }
    s.coords_ = detail::orth_cols(raw, eps_rank);
    s.rebuild_basis();
    return s;
  }

  static RealSubspace from_coords(Eigen::Index n, Eigen::MatrixXd coords) {
    RealSubspace s;
    s.n_ = n;
    s.coords_ = std::move(coords);
    s.rebuild_basis();
    return s;
  }

  Eigen::Index dim() const { return coords_.cols(); }
  Eigen::Index matrix_size() const { return n_; }
  const std::vector<CMatrix>& basis() const { return basis_; }
  const Eigen::MatrixXd& coord_matrix() const { return coords_; }

  /// Coordinates of X in the orthonormal basis.
  Eigen::VectorXd coords_of(const CMatrix& x) const {
    return coords_.transpose() * vec_real(x);
  }

  CMatrix from_coords_of(const Eigen::VectorXd& c) const {
    return unvec_real(coords_ * c, n_);
  }

  /// Orthogonal projection of X onto the subspace.
  CMatrix project(const CMatrix& x) const {
    return unvec_real(coords_ * (coords_.transpose() * vec_real(x)), n_);
  }

  /// Distance from X to the subspace.
  double distance(const CMatrix& x) const {
    return frob_norm(x - project(x));
  }

  bool contains(const CMatrix& x, double tol) const {
    return distance(x) <= tol * (1.0 + frob_norm(x));
  }

  double gram_residual() const {
    if (dim() == 0) return 0.0;
    Eigen::MatrixXd g = coords_.transpose() * coords_;
    return (g - Eigen::MatrixXd::Identity(dim(), dim())).norm();
  }

  RealSubspace intersect(const RealSubspace& other, double eps_rank) const {
    check_ambient(other);
    return from_coords(n_,
                       detail::intersect_cols(coords_, other.coords_, eps_rank));
  }

  RealSubspace sum(const RealSubspace& other, double eps_rank) const {
    check_ambient(other);
    return from_coords(n_, detail::sum_cols(coords_, other.coords_, eps_rank));
  }

  /// Orthogonal complement of this subspace inside an ambient subspace.
  RealSubspace orthocomplement_in(const RealSubspace& ambient,
                                  double eps_rank) const {
    check_ambient(ambient);
    return from_coords(
        n_, detail::complement_in_cols(coords_, ambient.coords_, eps_rank));
  }

  double distance_to(const RealSubspace& other) const {
    check_ambient(other);
    return detail::subspace_distance_cols(coords_, other.coords_);
  }

  /// Image of the subspace under a real-linear map on matrices.
  RealSubspace map(const std::function<CMatrix(const CMatrix&)>& f,
                   double eps_rank) const {
    std::vector<CMatrix> img;
    img.reserve(basis_.size());
    for (const auto& b : basis_) img.push_back(f(b));
    if (img.empty()) return zero(n_);
    return span_of(img, eps_rank);
  }

  /// Matrix of a real-linear operator that maps this subspace into itself,
  /// together with the worst invariance residual.
  std::pair<Eigen::MatrixXd, double> operator_matrix(
      const std::function<CMatrix(const CMatrix&)>& f) const {
    Eigen::MatrixXd m(dim(), dim());
    double resid = 0.0;
    for (Eigen::Index j = 0; j < dim(); ++j) {
      CMatrix fx = f(basis_[static_cast<size_t>(j)]);
      m.col(j) = coords_of(fx);
      resid = std::max(resid, frob_norm(fx - from_coords_of(m.col(j))));
    }
    return {m, resid};
  }

 private:
  void check_ambient(const RealSubspace& other) const {
    if (n_ != other.n_)
      throw AmbientMismatch("subspace ambient sizes differ");
  }

  void rebuild_basis() {
    basis_.clear();
    basis_.reserve(static_cast<size_t>(coords_.cols()));
    for (Eigen::Index j = 0; j < coords_.cols(); ++j)
      basis_.push_back(unvec_real(coords_.col(j), n_));
  }

  Eigen::Index n_ = 0;
  std::vector<CMatrix> basis_;
  Eigen::MatrixXd coords_;
};

/// A complex subspace of the complexification V (x) C of a real frame V,
/// stored as orthonormal complex coordinate columns with respect to the
/// frame's orthonormal basis.
struct ComplexSubspace {
  Eigen::Index frame_dim = 0;
  Eigen::MatrixXcd q;  // frame_dim x m, orthonormal columns

  Eigen::Index dim() const { return q.cols(); }

  ComplexSubspace intersect(const ComplexSubspace& other,
                            double eps_rank) const {
    if (frame_dim != other.frame_dim)
      throw AmbientMismatch("complex subspace frames differ");
    return {frame_dim, detail::intersect_cols(q, other.q, eps_rank)};
  }

  ComplexSubspace sum(const ComplexSubspace& other, double eps_rank) const {
    if (frame_dim != other.frame_dim)
      throw AmbientMismatch("complex subspace frames differ");
    return {frame_dim, detail::sum_cols(q, other.q, eps_rank)};
  }

  /// Real vectors contained in the subspace, as coordinates in the frame.
  Eigen::MatrixXd real_point_coords(double eps_rank) const {
    if (dim() == 0) return Eigen::MatrixXd(frame_dim, 0);
    Eigen::MatrixXcd p =
        Eigen::MatrixXcd::Identity(frame_dim, frame_dim) - q * q.adjoint();
    Eigen::MatrixXd stacked(2 * frame_dim, frame_dim);
    stacked.topRows(frame_dim) = p.real();
    stacked.bottomRows(frame_dim) = p.imag();
    return detail::nullspace_cols(stacked, eps_rank);
  }

  /// Real form cut: the real subspace of matrices whose frame coordinates
  /// lie in this complex subspace.
  RealSubspace real_points(const RealSubspace& frame, double eps_rank) const {
    Eigen::MatrixXd rc = real_point_coords(eps_rank);
    std::vector<CMatrix> gens;
    for (Eigen::Index j = 0; j < rc.cols(); ++j)
      gens.push_back(frame.from_coords_of(rc.col(j)));
    if (gens.empty()) return RealSubspace::zero(frame.matrix_size());
    return RealSubspace::span_of(gens, eps_rank);
  }

  static ComplexSubspace full(Eigen::Index d) {
    return {d, Eigen::MatrixXcd::Identity(d, d)};
  }

  /// Complexification of a set of real coordinate vectors.
  static ComplexSubspace from_real_coords(const Eigen::MatrixXd& c,
                                          double eps_rank) {
    return {c.rows(), detail::orth_cols(Eigen::MatrixXcd(c.cast<complexd>()),
                                        eps_rank)};
  }
};

/// One joint eigenspace of a commuting family: the eigenvalue tuple and an
/// orthonormal complex basis in frame coordinates.
struct EigenBlock {
  Eigen::VectorXcd value;
  ComplexSubspace space;
};

namespace detail {

/// Single-linkage clustering of complex values (union-find over all pairs
/// within the radius). Clusters are ordered by their mean, lexicographically
/// in (real part, imaginary part).
inline std::vector<std::vector<Eigen::Index>> cluster_values(
    const Eigen::VectorXcd& vals, double radius) {
  const Eigen::Index n = vals.size();
  std::vector<Eigen::Index> parent(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) parent[static_cast<size_t>(i)] = i;
  std::function<Eigen::Index(Eigen::Index)> find =
      [&](Eigen::Index i) -> Eigen::Index {
    while (parent[static_cast<size_t>(i)] != i) {
      parent[static_cast<size_t>(i)] =
          parent[static_cast<size_t>(parent[static_cast<size_t>(i)])];
      i = parent[static_cast<size_t>(i)];
    }
    return i;
  };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (std::abs(vals(i) - vals(j)) <= radius)
        parent[static_cast<size_t>(find(i))] = find(j);
  std::map<Eigen::Index, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<Eigen::Index>> clusters;
  for (auto& [root, members] : groups) clusters.push_back(std::move(members));
  std::sort(clusters.begin(), clusters.end(),
            [&](const std::vector<Eigen::Index>& a,
                const std::vector<Eigen::Index>& b) {
              complexd ma = 0.0, mb = 0.0;
              for (auto i : a) ma += vals(i);
              for (auto i : b) mb += vals(i);
              ma /= static_cast<double>(a.size());
              mb /= static_cast<double>(b.size());
              if (ma.real() != mb.real()) return ma.real() < mb.real();
              return ma.imag() < mb.imag();
            });
  return clusters;
}

}  // namespace detail

/// Joint eigenspace decomposition of a family of commuting operators given
/// as complex d x d matrices acting on the complexification C^d of a frame.
/// Eigenvalues are clustered with the given radius; blocks are ordered
/// lexicographically by eigenvalue tuple (real part, then imaginary part).
inline std::vector<EigenBlock> joint_eigensplit(
    const std::vector<Eigen::MatrixXcd>& ops, double eps_cluster,
    double eps_comm, double eps_rank) {
  if (ops.empty()) throw CosetError("joint_eigensplit: no operators");
  const Eigen::Index d = ops[0].rows();
  for (size_t i = 0; i < ops.size(); ++i)
    for (size_t j = i + 1; j < ops.size(); ++j) {
      double c = (ops[i] * ops[j] - ops[j] * ops[i]).norm();
      if (c > eps_comm)
        throw NonCommuting("joint_eigensplit: commutator norm " +
                           std::to_string(c));
    }

  struct Block {
    Eigen::VectorXcd value;
    Eigen::MatrixXcd q;
  };
  std::vector<Block> blocks{{Eigen::VectorXcd(0),
                             Eigen::MatrixXcd::Identity(d, d)}};

  for (const auto& t : ops) {
    std::vector<Block> next;
    for (const auto& blk : blocks) {
      const Eigen::Index m = blk.q.cols();
      Eigen::MatrixXcd r = blk.q.adjoint() * (t * blk.q);
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(r);
      auto clusters = detail::cluster_values(ces.eigenvalues(), eps_cluster);
      for (const auto& cl : clusters) {
        complexd mean = 0.0;
        Eigen::MatrixXcd vecs(m, static_cast<Eigen::Index>(cl.size()));
        for (size_t i = 0; i < cl.size(); ++i) {
          mean += ces.eigenvalues()(cl[i]);
          vecs.col(static_cast<Eigen::Index>(i)) = ces.eigenvectors().col(cl[i]);
        }
        mean /= static_cast<double>(cl.size());
        Eigen::MatrixXcd w = detail::orth_cols(vecs, eps_rank);
        if (w.cols() != static_cast<Eigen::Index>(cl.size())) {
          // Defective within the cluster: fall back to the kernel of
          // (R - mean)^mult, which spans the invariant subspace.
          Eigen::MatrixXcd shifted =
              r - mean * Eigen::MatrixXcd::Identity(m, m);
          Eigen::MatrixXcd pw = Eigen::MatrixXcd::Identity(m, m);
          for (size_t i = 0; i < cl.size(); ++i) pw = pw * shifted;
          w = detail::nullspace_cols(pw, eps_rank);
        }
        Block nb;
        nb.value.resize(blk.value.size() + 1);
        nb.value.head(blk.value.size()) = blk.value;
        nb.value(blk.value.size()) = mean;
        nb.q = blk.q * w;
        next.push_back(std::move(nb));
      }
    }
    blocks = std::move(next);
  }

  std::sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) {
    for (Eigen::Index i = 0; i < a.value.size(); ++i) {
      if (a.value(i).real() != b.value(i).real())
        return a.value(i).real() < b.value(i).real();
      if (a.value(i).imag() != b.value(i).imag())
        return a.value(i).imag() < b.value(i).imag();
    }
    return false;
  });

  std::vector<EigenBlock> out;
  out.reserve(blocks.size());
  for (auto& b : blocks)
    out.push_back({std::move(b.value), ComplexSubspace{d, std::move(b.q)}});
  return out;
}

/// Split a subspace into +1/-1 eigenspaces of an involutive real-linear map.
/// Throws NotInvariant if the map does not preserve the domain.
inline std::pair<RealSubspace, RealSubspace> involution_split(
    const RealSubspace& domain,
    const std::function<CMatrix(const CMatrix&)>& invol, double eps_rank) {
  auto [m, resid] = domain.operator_matrix(invol);
  if (resid > 1e-7)
    throw NotInvariant("involution_split: domain not preserved, residual " +
                       std::to_string(resid));
  const Eigen::Index d = domain.dim();
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd plus_c = detail::nullspace_cols(Eigen::MatrixXd(m - id),
                                                  eps_rank);
  Eigen::MatrixXd minus_c = detail::nullspace_cols(Eigen::MatrixXd(m + id),
                                                   eps_rank);
  if (plus_c.cols() + minus_c.cols() != d)
    throw NotInvariant("involution_split: eigenspace dims do not add up");
  auto lift = [&](const Eigen::MatrixXd& c) {
    std::vector<CMatrix> gens;
    for (Eigen::Index j = 0; j < c.cols(); ++j)
      gens.push_back(domain.from_coords_of(c.col(j)));
    if (gens.empty()) return RealSubspace::zero(domain.matrix_size());
    return RealSubspace::span_of(gens, eps_rank);
  };
  return {lift(plus_c), lift(minus_c)};
}

}  // namespace coset
