#include "tubespec/xsection.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/SparseLU>

#include "tubespec/eigensolver.hpp"
#include "tubespec/errors.hpp"

namespace tubespec {

AssembledOperator assemble_dirichlet_laplacian(const GridDomain& domain) {
    check_domain(domain);
    const int n = domain.size();
    const int ndir = domain.dim == 1 ? 2 : 4;
    const double h = domain.h;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<size_t>(n) * (ndir + 1));
    for (int k = 0; k < n; ++k) {
        double diag = 0.0;
        for (int dir = 0; dir < ndir; ++dir) {
            const int m = domain.neighbor(k, dir);
            if (m >= 0) {
                diag += 1.0 / (h * h);
                t.emplace_back(k, m, -1.0 / (h * h));
            } else {
                diag += 1.0 / (h * domain.dist[k][dir]);
            }
        }
        t.emplace_back(k, k, diag);
    }
    AssembledOperator op;
    op.re.resize(n, n);
    op.re.setFromTriplets(t.begin(), t.end());
    op.name = "dirichlet-laplacian:" + domain.descriptor;
    op.grid.nt = n;
    op.cell = domain.cell();
    op.boundary = {"Dirichlet"};
    return op;
}

ModeSet lowest_modes(const AssembledOperator& op, int k, const GridDomain& domain) {
    if (op.is_complex) throw NotApplicable("cross-section operators are real");
    EigenOptions opt;
    opt.k = k;
    opt.sigma = 0.0;
    opt.tol = 1e-11;
    auto r = smallest_eigs<double>(op.re, opt);
    ModeSet ms;
    ms.values = r.values;
    ms.vectors = r.vectors / std::sqrt(domain.cell());
    ms.residuals.resize(k);
    for (int i = 0; i < k; ++i) {
        const Vec v = ms.vectors.col(i);
        ms.residuals(i) = domain.norm(op.re * v - ms.values(i) * v) / std::abs(ms.values(i));
        if (!(ms.residuals(i) <= 1e-8)) {
            throw EigensolverDiverged("cross-section mode " + std::to_string(i) +
                                      " residual " + std::to_string(ms.residuals(i)));
        }
    }
    return ms;
}

AssembledOperator angular_derivative(const GridDomain& domain) {
    if (domain.dim != 2) throw NotApplicable("the angular derivative needs a 2D cross section");
    const int n = domain.size();
    const double h = domain.h;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<size_t>(n) * 5);
    for (int k = 0; k < n; ++k) {
        // Coefficient of d/dtau_2 is tau_3, of d/dtau_3 is -tau_2.
        const double coef[4] = {domain.y(k), domain.y(k), -domain.x(k), -domain.x(k)};
        for (int dir = 0; dir < 4; ++dir) {
            const double c = coef[dir] * ((dir % 2 == 0) ? 1.0 : -1.0) / (2.0 * h);
            const int m = domain.neighbor(k, dir);
            if (m >= 0) {
                t.emplace_back(k, m, c);
            } else {
                const double ghost = 1.0 - h / domain.dist[k][dir];
                if (ghost != 0.0) t.emplace_back(k, k, c * ghost);
            }
        }
    }
    AssembledOperator op;
    op.re.resize(n, n);
    op.re.setFromTriplets(t.begin(), t.end());
    op.name = "angular-derivative:" + domain.descriptor;
    op.grid.nt = n;
    op.cell = domain.cell();
    return op;
}

namespace {

// (-Lap_h - lambda1) x = g with <x, J1> = 0 through the bordered system.
Vec deflated_solve(const GridDomain& domain, const SpMat& lap, const Vec& J, double l1, const Vec& g) {
    const int n = domain.size();
    const Vec c = J * std::sqrt(domain.cell());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(lap.nonZeros() + 2 * n + 1);
    for (int k = 0; k < lap.outerSize(); ++k) {
        for (SpMat::InnerIterator it(lap, k); it; ++it) {
            const double v = it.value() - (it.row() == it.col() ? l1 : 0.0);
            t.emplace_back(it.row(), it.col(), v);
        }
    }
    for (int k = 0; k < n; ++k) {
        t.emplace_back(k, n, c(k));
        t.emplace_back(n, k, c(k));
    }
    SpMat kkt(n + 1, n + 1);
    kkt.setFromTriplets(t.begin(), t.end());
    kkt.makeCompressed();
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(kkt);
    if (lu.info() != Eigen::Success) throw FactorizationFailed("bordered factorization failed on " + domain.descriptor);
    Vec rhs = Vec::Zero(n + 1);
    rhs.head(n) = g;
    Vec x = lu.solve(rhs);
    for (int it = 0; it < 2; ++it) x += lu.solve(rhs - kkt * x);
    return x.head(n);
}

// Limit of the transverse Peierls form with the symmetric gauge
// (-tau_3/2, tau_2/2) of a unit axial field: the coefficient of beta^2 in the
// ground energy at phase beta times the edge-averaged potential times h.
double lattice_axial_moment(const GridDomain& domain, const SpMat& lap, const Vec& J, double l1) {
    const int n = domain.size();
    const double h = domain.h, w = 1.0 / (h * h);
    Vec q = Vec::Zero(n);
    double diag = 0.0;
    for (int k = 0; k < n; ++k) {
        for (int dir : {0, 2}) {
            const int m = domain.neighbor(k, dir);
            if (m < 0) continue;
            const double c = dir == 0 ? -0.25 * (domain.y(k) + domain.y(m)) * h : 0.25 * (domain.x(k) + domain.x(m)) * h;
            q(k) -= c * w * J(m);
            q(m) += c * w * J(k);
            diag += c * c * w * J(k) * J(m);
        }
    }
    diag *= domain.cell();
    const Vec x = deflated_solve(domain, lap, J, l1, q);
    return diag - domain.dot(q, x);
}

}  // namespace

Vec solve_r_omega(const GridDomain& domain, const ModeSet& modes) {
    const auto lap = assemble_dirichlet_laplacian(domain);
    const auto D = angular_derivative(domain);
    const Vec J = modes.vectors.col(0);
    const Vec g = D.re * J;
    const double defect = domain.dot(g, J);
    if (std::abs(defect) > 1e-8 * std::max(1.0, domain.norm(g))) {
        throw FredholmViolation("<d_alpha J1, J1> = " + std::to_string(defect));
    }
    return deflated_solve(domain, lap.re, J, modes.values(0), g);
}

XSectionConstants compute_constants(const GridDomain& domain) {
    XSectionConstants c;
    c.descriptor = domain.descriptor;
    c.h = domain.h;
    c.dim = domain.dim;
    const auto lap = assemble_dirichlet_laplacian(domain);
    const int k = std::min(2, domain.size() - 1);
    if (k < 1) throw DomainEmpty(domain.descriptor + " has too few nodes for mode analysis");
    const ModeSet modes = lowest_modes(lap, k, domain);
    c.lambda1 = modes.values(0);
    c.lambda2 = k > 1 ? modes.values(1) : c.lambda1;
    c.J1 = modes.vectors.col(0);
    if (c.J1.minCoeff() <= 0) {
        throw EigensolverDiverged("ground mode is not positive on " + domain.descriptor);
    }
    const int n = domain.size();
    Vec t2(n), t3(n);
    for (int i = 0; i < n; ++i) {
        t2(i) = domain.x(i);
        t3(i) = domain.dim == 2 ? domain.y(i) : 0.0;
    }
    const Vec J2 = c.J1.cwiseProduct(c.J1);
    c.m2 = domain.cell() * t2.dot(J2);
    c.m3 = domain.cell() * t3.dot(J2);
    c.t22 = domain.cell() * t2.cwiseProduct(t2).dot(J2);
    c.t23 = domain.cell() * t2.cwiseProduct(t3).dot(J2);
    c.t33 = domain.cell() * t3.cwiseProduct(t3).dot(J2);
    c.second_moment = c.t22 + c.t33;
    c.rho = Vec::Zero(n);
    if (domain.dim == 2) {
        const auto D = angular_derivative(domain);
        const Vec g = D.re * c.J1;
        c.fredholm_defect = domain.dot(g, c.J1);
        c.p = domain.dot(g, g);
        c.rho = solve_r_omega(domain, modes);
        c.kappa_mag = domain.dot(c.rho, g);
        c.kappa_mag_energy = domain.dot(c.rho, lap.re * c.rho - c.lambda1 * c.rho);
    }
    c.M = c.second_moment / 4.0 - c.kappa_mag;
    c.M_lattice = domain.dim == 2 ? lattice_axial_moment(domain, lap.re, c.J1, c.lambda1) : c.M;
    return c;
}

ConstantsCache& ConstantsCache::global() {
    static ConstantsCache cache;
    return cache;
}

std::string ConstantsCache::key(const std::string& descriptor, double h) {
    std::ostringstream os;
    os << descriptor << "@" << std::setprecision(17) << h;
    return os.str();
}

std::shared_ptr<const XSectionConstants> ConstantsCache::get(const GridDomain& domain) {
    const std::string k = key(domain.descriptor, domain.h);
    {
        std::shared_lock lock(mu_);
        auto it = entries_.find(k);
        if (it != entries_.end() && it->second->J1.size() == domain.size()) {
            ++hits_;
            return it->second;
        }
    }
    auto c = std::make_shared<const XSectionConstants>(compute_constants(domain));
    std::unique_lock lock(mu_);
    ++misses_;
    auto [it, inserted] = entries_.emplace(k, c);
    if (!inserted) it->second = c;
    return it->second;
}

bool ConstantsCache::contains(const std::string& descriptor, double h) const {
    std::shared_lock lock(mu_);
    return entries_.count(key(descriptor, h)) > 0;
}

void ConstantsCache::clear() {
    std::unique_lock lock(mu_);
    entries_.clear();
}

std::size_t ConstantsCache::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

namespace {

void write_vec(std::ostream& os, const char* name, const Vec& v) {
    os << name << " =";
    for (Eigen::Index i = 0; i < v.size(); ++i) os << " " << v(i);
    os << "\n";
}

Vec read_vec(const std::string& s) {
    std::istringstream is(s);
    std::vector<double> vals;
    double x;
    while (is >> x) vals.push_back(x);
    return Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace

void ConstantsCache::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write constants cache " + path);
    os << "# tubespec cross-section constants cache, schema 1\n";
    os << std::setprecision(17);
    std::shared_lock lock(mu_);
    for (const auto& [k, c] : entries_) {
        os << "[record]\n";
        os << "key = " << k << "\n";
        os << "descriptor = " << c->descriptor << "\n";
        os << "h = " << c->h << "\n";
        os << "dim = " << c->dim << "\n";
        os << "lambda1 = " << c->lambda1 << "\n";
        os << "lambda2 = " << c->lambda2 << "\n";
        os << "m2 = " << c->m2 << "\n";
        os << "m3 = " << c->m3 << "\n";
        os << "t22 = " << c->t22 << "\n";
        os << "t23 = " << c->t23 << "\n";
        os << "t33 = " << c->t33 << "\n";
        os << "second_moment = " << c->second_moment << "\n";
        os << "p = " << c->p << "\n";
        os << "kappa_mag = " << c->kappa_mag << "\n";
        os << "kappa_mag_energy = " << c->kappa_mag_energy << "\n";
        os << "fredholm_defect = " << c->fredholm_defect << "\n";
        os << "M = " << c->M << "\n";
        os << "M_lattice = " << c->M_lattice << "\n";
        write_vec(os, "J1", c->J1);
        write_vec(os, "rho", c->rho);
    }
}

void ConstantsCache::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read constants cache " + path);
    std::string line, key_name;
    std::map<std::string, std::string> rec;
    auto flush = [&]() {
        if (rec.empty()) return;
        auto c = std::make_shared<XSectionConstants>();
        auto num = [&](const char* f) { return rec.count(f) ? std::stod(rec[f]) : 0.0; };
        c->descriptor = rec["descriptor"];
        c->h = num("h");
        c->dim = static_cast<int>(num("dim"));
        c->lambda1 = num("lambda1");
        c->lambda2 = num("lambda2");
        c->m2 = num("m2");
        c->m3 = num("m3");
        c->t22 = num("t22");
        c->t23 = num("t23");
        c->t33 = num("t33");
        c->second_moment = num("second_moment");
        c->p = num("p");
        c->kappa_mag = num("kappa_mag");
        c->kappa_mag_energy = num("kappa_mag_energy");
        c->fredholm_defect = num("fredholm_defect");
        c->M = num("M");
        c->M_lattice = rec.count("M_lattice") ? num("M_lattice") : c->M;
        c->J1 = read_vec(rec["J1"]);
        c->rho = read_vec(rec["rho"]);
        std::unique_lock lock(mu_);
        entries_[key(c->descriptor, c->h)] = c;
        rec.clear();
    };
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line == "[record]") {
            flush();
            continue;
        }
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) {
            const auto e2 = line.find(" =");
            if (e2 == std::string::npos) throw ConfigError("malformed cache line: " + line);
            rec[line.substr(0, e2)] = "";
            continue;
        }
        rec[line.substr(0, eq)] = line.substr(eq + 3);
    }
    flush();
}

}  // namespace tubespec
