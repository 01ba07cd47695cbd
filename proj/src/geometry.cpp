#include "spatx/geometry.hpp"

#include <cmath>
#include <sstream>

#include "spatx/errors.hpp"

namespace spatx {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

void check_finite(const Location& p) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw DomainError("non-finite coordinate at location '" + p.id + "'");
}

void check_latitude(double lat) {
    if (lat < -90.0 || lat > 90.0) {
        std::ostringstream os;
        os << "latitude " << lat << " outside [-90, 90]";
        throw DomainError(os.str());
    }
}

}  // namespace

DistanceMetric::DistanceMetric() : kind_(Kind::Euclidean) {}

DistanceMetric DistanceMetric::euclidean() { return DistanceMetric(); }

DistanceMetric DistanceMetric::great_circle() {
    DistanceMetric m;
    m.kind_ = Kind::GreatCircle;
    return m;
}

DistanceMetric DistanceMetric::cluster_membership(std::map<std::string, std::string> cluster_of) {
    DistanceMetric m;
    m.kind_ = Kind::ClusterMembership;
    m.clusters_ = std::make_shared<const std::map<std::string, std::string>>(std::move(cluster_of));
    return m;
}

DistanceMetric DistanceMetric::custom(std::map<std::pair<std::string, std::string>, double> table) {
    for (const auto& [key, v] : table)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw DomainError("custom distance for (" + key.first + ", " + key.second + ") must be finite and >= 0");
    DistanceMetric m;
    m.kind_ = Kind::Custom;
    m.table_ = std::make_shared<const std::map<std::pair<std::string, std::string>, double>>(std::move(table));
    return m;
}

std::string DistanceMetric::name() const {
    switch (kind_) {
    case Kind::Euclidean: return "euclidean";
    case Kind::GreatCircle: return "great_circle";
    case Kind::ClusterMembership: return "cluster";
    case Kind::Custom: return "custom";
    }
    return "?";
}

double haversine_miles(double lon1, double lat1, double lon2, double lat2) {
    check_latitude(lat1);
    check_latitude(lat2);
    double p1 = lat1 * kDegToRad;
    double p2 = lat2 * kDegToRad;
    double sdlat = std::sin((p2 - p1) / 2.0);
    double sdlon = std::sin((lon2 - lon1) * kDegToRad / 2.0);
    double a = sdlat * sdlat + std::cos(p1) * std::cos(p2) * sdlon * sdlon;
    if (a > 1.0) a = 1.0;
    return 2.0 * kEarthRadiusMiles * std::asin(std::sqrt(a));
}

double DistanceMetric::operator()(const Location& a, const Location& b) const {
    switch (kind_) {
    case Kind::Euclidean:
        check_finite(a);
        check_finite(b);
        return std::hypot(a.x - b.x, a.y - b.y);
    case Kind::GreatCircle:
        check_finite(a);
        check_finite(b);
        return haversine_miles(a.x, a.y, b.x, b.y);
    case Kind::ClusterMembership: {
        auto ca = clusters_->find(a.id);
        auto cb = clusters_->find(b.id);
        if (ca == clusters_->end()) throw LookupError("no cluster for location '" + a.id + "'");
        if (cb == clusters_->end()) throw LookupError("no cluster for location '" + b.id + "'");
        return ca->second == cb->second ? 0.0 : 1.0;
    }
    case Kind::Custom: {
        auto it = table_->find({a.id, b.id});
        if (it != table_->end()) return it->second;
        if (a.id == b.id) return 0.0;
        throw LookupError("custom distance table has no entry (" + a.id + ", " + b.id + ")");
    }
    }
    return 0.0;
}

double distance(const DistanceMetric& metric, const Location& a, const Location& b) { return metric(a, b); }

DistanceBin::DistanceBin(double c, double h) : center(c), half_width(h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("bin half-width must be > 0");
    if (!std::isfinite(c)) throw DomainError("bin center must be finite");
}

bool in_bin(const DistanceBin& bin, double dist) { return std::fabs(dist - bin.center) <= bin.half_width; }

Kernel::Kernel(KernelKind k, double h) : kind(k), bandwidth(h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("kernel bandwidth must be > 0");
}

double kernel_profile(KernelKind kind, double u) {
    double a = std::fabs(u);
    if (a > 1.0) return 0.0;
    switch (kind) {
    case KernelKind::Uniform: return 1.0;
    case KernelKind::Triangular: return 1.0 - a;
    case KernelKind::Epanechnikov: return 0.75 * (1.0 - a * a);
    }
    return 0.0;
}

// The uniform case compares |dist - d| <= h directly so that it agrees with
// in_bin bit for bit; (dist - d) / h can round across 1.
double kernel_weight(const Kernel& k, double dist, double center) {
    if (k.kind == KernelKind::Uniform) return std::fabs(dist - center) <= k.bandwidth ? 1.0 : 0.0;
    return kernel_profile(k.kind, (dist - center) / k.bandwidth);
}

bool HalfOpenBin::contains(double dist) const {
    if (closed_lo && dist == lo) return true;
    return dist > lo && dist <= hi;
}

Window::Window(Kind kind, double center, double half_width)
    : kind_(kind), center_(center), half_width_(half_width) {}

Window Window::closed(const DistanceBin& bin) { return Window(Kind::Closed, bin.center, bin.half_width); }

Window Window::closed(double center, double half_width) { return closed(DistanceBin(center, half_width)); }

Window Window::half_open(const HalfOpenBin& bin) {
    if (!(bin.hi > bin.lo)) throw DomainError("partition bin needs hi > lo");
    Window w(Kind::HalfOpen, 0.5 * (bin.lo + bin.hi), 0.5 * (bin.hi - bin.lo));
    w.half_open_ = bin;
    return w;
}

Window Window::smooth(const Kernel& kernel, double center) {
    Window w(Kind::Smooth, center, kernel.bandwidth);
    w.kernel_ = kernel.kind;
    return w;
}

double Window::weight(double dist) const {
    switch (kind_) {
    case Kind::Closed: return std::fabs(dist - center_) <= half_width_ ? 1.0 : 0.0;
    case Kind::HalfOpen: return half_open_.contains(dist) ? 1.0 : 0.0;
    case Kind::Smooth: return kernel_weight(Kernel(kernel_, half_width_), dist, center_);
    }
    return 0.0;
}

std::string Window::describe() const {
    std::ostringstream os;
    switch (kind_) {
    case Kind::Closed: os << "bin [" << center_ - half_width_ << ", " << center_ + half_width_ << "]"; break;
    case Kind::HalfOpen:
        os << "bin " << (half_open_.closed_lo ? "[" : "(") << half_open_.lo << ", " << half_open_.hi << "]";
        break;
    case Kind::Smooth: os << "kernel at " << center_ << " bandwidth " << half_width_; break;
    }
    return os.str();
}

}  // namespace spatx
