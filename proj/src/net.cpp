#include "lsim/net/net.hpp"

#include <fmt/format.h>

#include <cassert>
#include <cstring>
#include <fstream>

namespace lsim::net {

namespace {

// Workspaces are per-thread so a fully constructed net can be shared across
// threads during inference.
Workspace<double>& ws_d() {
    static thread_local Workspace<double> ws;
    return ws;
}
Workspace<ad::D1>& ws_d1() {
    static thread_local Workspace<ad::D1> ws;
    return ws;
}

}  // namespace

PseudoInvertibleNet::PseudoInvertibleNet(NetDims dims, Rng& rng) : dims_(dims) {
    dims_.validate();
    params_.assign(dims_.total_param_count(), 0.0);
    // Lift starts as [I_n; G], G ~ N(0, 0.1^2): a near-orthogonal lift so the
    // round trip is exact from step 0.
    std::normal_distribution<double> g(0.0, 0.1);
    for (int r = 0; r < dims_.m; ++r)
        for (int c = 0; c < dims_.n; ++c)
            params_[r * dims_.n + c] = (r < dims_.n) ? (r == c ? 1.0 : 0.0) : g(rng);
    // Hidden layers get He-style init; each subnet's final linear layer is
    // zeroed so s == 0, t == 0 and phi starts as the identity.
    const MlpDims sd = dims_.subnet();
    for (int layer = 0; layer < dims_.layers; ++layer)
        for (int side = 0; side < 2; ++side) {
            double* p = params_.data() + dims_.subnet_offset(layer, side);
            std::size_t off = 0;
            int fan_in = sd.in;
            for (int l = 0; l < sd.depth; ++l) {
                const int rows = sd.width;
                std::normal_distribution<double> w(0.0, std::sqrt(2.0 / fan_in));
                for (int i = 0; i < rows * fan_in; ++i) p[off + i] = w(rng);
                off += static_cast<std::size_t>(rows) * fan_in + rows;  // biases stay 0
                fan_in = sd.width;
            }
            // final layer left at zero
        }
    refresh_pseudo_inverse();
}

Vec PseudoInvertibleNet::encode(const Vec& x) const {
    assert(x.size() == dims_.n);
    Vec z(dims_.m);
    encode_kernel<double, double>(dims_, params_, std::span<const double>(x.data(), x.size()),
                                  std::span<double>(z.data(), z.size()), ws_d());
    return z;
}

Vec PseudoInvertibleNet::decode(const Vec& z) const {
    assert(z.size() == dims_.m);
    Vec u = phi_inverse(z);
    return pinv() * u;
}

Vec PseudoInvertibleNet::phi_forward(const Vec& u) const {
    Vec z = u;
    net::phi_forward<double, double>(dims_, params_, std::span<double>(z.data(), z.size()),
                                     ws_d());
    return z;
}

Vec PseudoInvertibleNet::phi_inverse(const Vec& z) const {
    Vec u = z;
    net::phi_inverse<double, double>(dims_, params_, std::span<double>(u.data(), u.size()),
                                     ws_d());
    return u;
}

Vec PseudoInvertibleNet::phi_jvp(const Vec& u, const Vec& w) const {
    assert(u.size() == dims_.m && w.size() == dims_.m);
    std::vector<ad::D1> z(dims_.m);
    for (int i = 0; i < dims_.m; ++i) z[i] = {u[i], w[i]};
    net::phi_forward<ad::D1, double>(dims_, params_, std::span<ad::D1>(z), ws_d1());
    Vec out(dims_.m);
    for (int i = 0; i < dims_.m; ++i) out[i] = z[i].d;
    return out;
}

Mat PseudoInvertibleNet::lift() const {
    Mat a(dims_.m, dims_.n);
    for (int r = 0; r < dims_.m; ++r)
        for (int c = 0; c < dims_.n; ++c) a(r, c) = params_[r * dims_.n + c];
    return a;
}

void PseudoInvertibleNet::set_lift(const Mat& a) {
    if (a.rows() != dims_.m || a.cols() != dims_.n) throw Error("set_lift: shape mismatch");
    for (int r = 0; r < dims_.m; ++r)
        for (int c = 0; c < dims_.n; ++c) params_[r * dims_.n + c] = a(r, c);
    pinv_stale_ = true;
    refresh_pseudo_inverse();
}

void PseudoInvertibleNet::refresh_pseudo_inverse() {
    const Mat a = lift();
    const Mat ata = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Mat> es(ata);
    sigma_min_ = std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
    if (sigma_min_ < 1e-8)
        throw RankDeficiencyError(fmt::format(
            "lift refresh: smallest singular value {:.3e} below 1e-8", sigma_min_));
    std::vector<double> chol(ata.data(), ata.data() + dims_.n * dims_.n);  // symmetric
    ad::cholesky_factor(chol, dims_.n);
    pinv_ = a.transpose();  // n x m; solve (A^T A) X = A^T column by column
    for (int c = 0; c < dims_.m; ++c) {
        std::vector<double> col(dims_.n);
        for (int i = 0; i < dims_.n; ++i) col[i] = pinv_(i, c);
        ad::cholesky_solve(chol, dims_.n, std::span<double>(col));
        for (int i = 0; i < dims_.n; ++i) pinv_(i, c) = col[i];
    }
    pinv_stale_ = false;
}

const Mat& PseudoInvertibleNet::pinv() const {
    assert(!pinv_stale_);
    if (pinv_stale_) throw Error("pseudo-inverse is stale; call refresh_pseudo_inverse()");
    return pinv_;
}

void PseudoInvertibleNet::set_params(std::span<const double> p) {
    if (p.size() != params_.size()) throw Error("set_params: size mismatch");
    std::copy(p.begin(), p.end(), params_.begin());
    pinv_stale_ = true;
}

void PseudoInvertibleNet::perturb(double sigma, Rng& rng) {
    std::normal_distribution<double> d(0.0, sigma);
    for (double& p : params_) p += d(rng);
    pinv_stale_ = true;
    refresh_pseudo_inverse();
}

// ---- checkpoint format (documented in the README) ----
// "LSIM" | u32 version=1 | u32 n,m,layers,width,depth | f64 clamp |
// u64 param_count | param_count little-endian f64 in declaration order.

namespace {
constexpr char kMagic[4] = {'L', 'S', 'I', 'M'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& is, const char* what) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError(fmt::format("checkpoint: truncated while reading {}", what));
    return v;
}
}  // namespace

void save_checkpoint(const PseudoInvertibleNet& net, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(fmt::format("checkpoint: cannot open '{}' for writing", path.string()));
    os.write(kMagic, 4);
    put(os, kVersion);
    const NetDims& d = net.dims();
    put(os, static_cast<std::uint32_t>(d.n));
    put(os, static_cast<std::uint32_t>(d.m));
    put(os, static_cast<std::uint32_t>(d.layers));
    put(os, static_cast<std::uint32_t>(d.width));
    put(os, static_cast<std::uint32_t>(d.depth));
    put(os, d.clamp);
    put(os, static_cast<std::uint64_t>(net.params().size()));
    os.write(reinterpret_cast<const char*>(net.params().data()),
             static_cast<std::streamsize>(net.params().size() * sizeof(double)));
    if (!os) throw Error(fmt::format("checkpoint: write to '{}' failed", path.string()));
}

PseudoInvertibleNet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(fmt::format("checkpoint: cannot open '{}'", path.string()));
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic, not an LSIM checkpoint");
    const auto version = get<std::uint32_t>(is, "version");
    if (version != kVersion)
        throw FormatError(fmt::format("checkpoint: unsupported version {}", version));
    NetDims d;
    d.n = static_cast<int>(get<std::uint32_t>(is, "n"));
    d.m = static_cast<int>(get<std::uint32_t>(is, "m"));
    d.layers = static_cast<int>(get<std::uint32_t>(is, "layers"));
    d.width = static_cast<int>(get<std::uint32_t>(is, "width"));
    d.depth = static_cast<int>(get<std::uint32_t>(is, "depth"));
    d.clamp = get<double>(is, "clamp");
    if (d.m <= d.n)
        throw FormatError(
            fmt::format("checkpoint: header has m={} <= n={}, lift must be taller", d.m, d.n));
    d.validate();
    const auto count = get<std::uint64_t>(is, "param count");
    if (count != static_cast<std::uint64_t>(d.total_param_count()))
        throw FormatError(fmt::format("checkpoint: header declares {} params, dims need {}",
                                      count, d.total_param_count()));
    std::vector<double> params(count);
    is.read(reinterpret_cast<char*>(params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw FormatError("checkpoint: truncated parameter block");
    Rng rng = make_rng(0);
    PseudoInvertibleNet net(d, rng);
    net.set_params(params);
    net.refresh_pseudo_inverse();
    return net;
}

}  // namespace lsim::net
