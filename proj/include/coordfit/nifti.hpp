#pragma once

// NIfTI-1 subset: single-file .nii / .nii.gz, 348-byte header, sform geometry,
// datatypes uint8 / int16 / int32 / float32. Vector fields (coordinate,
// displacement, velocity) are stored 5-D with dim = (5, nx, ny, nz, 1, 3) and
// intent code 1007, component axis last, values in world mm.

#include <string>

#include "coordfit/types.hpp"

namespace coordfit {

ScalarVolume read_scalar_volume(const std::string& path);
LabelVolume read_label_volume(const std::string& path);
Mask read_mask(const std::string& path);  // nonzero voxels -> true

void write_volume(const ScalarVolume& vol, const std::string& path);   // float32
void write_volume(const LabelVolume& vol, const std::string& path);    // int32
void write_volume(const Mask& mask, const std::string& path);          // uint8

CoordField read_coord_field(const std::string& path);
void write_coord_field(const CoordField& cf, const std::string& path);

DisplacementField read_displacement_field(const std::string& path);
void write_displacement_field(const DisplacementField& df, const std::string& path);

// The scale-and-square step count rides along in intent_p1 (0 = auto).
SvfField read_svf_field(const std::string& path);
void write_svf_field(const SvfField& svf, const std::string& path);

} // namespace coordfit
