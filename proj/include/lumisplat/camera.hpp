#pragma once

#include "lumisplat/vec.hpp"

namespace lumisplat {

// Pinhole camera. Pixel (row r, col c) samples at image coordinates
// (x, y) = (c, r); the principal point is expressed in the same convention.
struct Camera {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
    Mat3 rotation;          // world-to-camera
    Vec3 translation{0, 0, 0};

    Vec3 to_camera(const Vec3& p_world) const { return rotation * p_world + translation; }

    // Inverse rigid transform.
    Vec3 to_world(const Vec3& p_cam) const { return rotation.transposed_mul(p_cam - translation); }

    Vec2 project(const Vec3& p_cam) const {
        return {fx * p_cam.x / p_cam.z + cx, fy * p_cam.y / p_cam.z + cy};
    }

    // Pixel (x, y) at camera depth z back to camera space.
    Vec3 unproject(double x, double y, double z) const {
        return {(x - cx) * z / fx, (y - cy) * z / fy, z};
    }
};

}  // namespace lumisplat
