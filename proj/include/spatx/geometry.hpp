#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>

namespace spatx {

inline constexpr double kEarthRadiusMiles = 3958.8;

// For GreatCircle, x is longitude and y is latitude, both in degrees.
// The id is consulted only by the ClusterMembership and Custom metrics.
struct Location {
    double x = 0.0;
    double y = 0.0;
    std::string id;
};

class DistanceMetric {
public:
    enum class Kind { Euclidean, GreatCircle, ClusterMembership, Custom };

    DistanceMetric();
    static DistanceMetric euclidean();
    static DistanceMetric great_circle();
    static DistanceMetric cluster_membership(std::map<std::string, std::string> cluster_of);
    static DistanceMetric custom(std::map<std::pair<std::string, std::string>, double> table);

    Kind kind() const { return kind_; }
    std::string name() const;
    double operator()(const Location& a, const Location& b) const;

private:
    Kind kind_;
    std::shared_ptr<const std::map<std::string, std::string>> clusters_;
    std::shared_ptr<const std::map<std::pair<std::string, std::string>, double>> table_;
};

double distance(const DistanceMetric& metric, const Location& a, const Location& b);
double haversine_miles(double lon1, double lat1, double lon2, double lat2);

// Closed interval [center - half_width, center + half_width].
struct DistanceBin {
    double center;
    double half_width;
    DistanceBin(double center, double half_width);
};

bool in_bin(const DistanceBin& bin, double dist);

enum class KernelKind { Uniform, Triangular, Epanechnikov };

struct Kernel {
    KernelKind kind;
    double bandwidth;
    Kernel(KernelKind kind, double bandwidth);
};

double kernel_profile(KernelKind kind, double u);
double kernel_weight(const Kernel& k, double dist, double center);

// (lo, hi], or [lo, hi] when closed_lo.  Used for tiling partitions.
struct HalfOpenBin {
    double lo;
    double hi;
    bool closed_lo;
    bool contains(double dist) const;
};

// Distance weighting used by every estimator: a closed bin, a half-open
// partition bin, or a smooth kernel around a center.
class Window {
public:
    enum class Kind { Closed, HalfOpen, Smooth };

    static Window closed(const DistanceBin& bin);
    static Window closed(double center, double half_width);
    static Window half_open(const HalfOpenBin& bin);
    static Window smooth(const Kernel& kernel, double center);

    double weight(double dist) const;
    Kind kind() const { return kind_; }
    double center() const { return center_; }
    double half_width() const { return half_width_; }
    std::string describe() const;

private:
    Window(Kind kind, double center, double half_width);
    Kind kind_;
    double center_;
    double half_width_;
    HalfOpenBin half_open_{0.0, 0.0, false};
    KernelKind kernel_ = KernelKind::Uniform;
};

}  // namespace spatx
