#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace lumisplat {

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    double& operator[](int i) { return (&x)[i]; }
    double operator[](int i) const { return (&x)[i]; }
};

struct Vec4 {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    Vec4() = default;
    Vec4(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

    double dot(const Vec4& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    double& operator[](int i) { return (&w)[i]; }
    double operator[](int i) const { return (&w)[i]; }
};

// Row-major 3x3.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double& operator()(int r, int c) { return m[r * 3 + c]; }
    double operator()(int r, int c) const { return m[r * 3 + c]; }

    static Mat3 identity() { return Mat3{}; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    Vec3 transposed_mul(const Vec3& v) const {
        return {m[0] * v.x + m[3] * v.y + m[6] * v.z, m[1] * v.x + m[4] * v.y + m[7] * v.z,
                m[2] * v.x + m[5] * v.y + m[8] * v.z};
    }
};

// Symmetric 2x2 stored as (xx, xy, yy).
struct Sym2 {
    double xx = 0.0, xy = 0.0, yy = 0.0;

    double det() const { return xx * yy - xy * xy; }

    // Inverse of a positive-definite matrix.
    Sym2 inverse() const {
        const double d = det();
        return {yy / d, -xy / d, xx / d};
    }

    double max_eigenvalue() const {
        const double mid = 0.5 * (xx + yy);
        const double disc = std::sqrt(std::max(0.0, mid * mid - det()));
        return mid + disc;
    }
};

// Unit quaternion (w, x, y, z) to rotation matrix. Caller normalizes.
inline Mat3 quat_to_rot(const Vec4& q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 r;
    r(0, 0) = 1 - 2 * (y * y + z * z);
    r(0, 1) = 2 * (x * y - w * z);
    r(0, 2) = 2 * (x * z + w * y);
    r(1, 0) = 2 * (x * y + w * z);
    r(1, 1) = 1 - 2 * (x * x + z * z);
    r(1, 2) = 2 * (y * z - w * x);
    r(2, 0) = 2 * (x * z - w * y);
    r(2, 1) = 2 * (y * z + w * x);
    r(2, 2) = 1 - 2 * (x * x + y * y);
    return r;
}

// Adjoint of quat_to_rot: maps dL/dR to dL/dq for a unit quaternion q.
inline Vec4 quat_to_rot_backward(const Vec4& q, const Mat3& gR) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Vec4 g{0, 0, 0, 0};
    g.w = 2 * (-z * gR(0, 1) + y * gR(0, 2) + z * gR(1, 0) - x * gR(1, 2) - y * gR(2, 0) + x * gR(2, 1));
    g.x = 2 * (y * gR(0, 1) + z * gR(0, 2) + y * gR(1, 0) - 2 * x * gR(1, 1) - w * gR(1, 2) + z * gR(2, 0) +
               w * gR(2, 1) - 2 * x * gR(2, 2));
    g.y = 2 * (-2 * y * gR(0, 0) + x * gR(0, 1) + w * gR(0, 2) + x * gR(1, 0) + z * gR(1, 2) - w * gR(2, 0) +
               z * gR(2, 1) - 2 * y * gR(2, 2));
    g.z = 2 * (-2 * z * gR(0, 0) - w * gR(0, 1) + x * gR(0, 2) + w * gR(1, 0) - 2 * z * gR(1, 1) + y * gR(1, 2) +
               x * gR(2, 0) + y * gR(2, 1));
    return g;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace lumisplat
