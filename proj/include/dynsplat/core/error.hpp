// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dynsplat {

/// Base class for all library errors. `kind()` is a stable machine-readable
/// tag; `what()` carries the human-readable detail (offending file, region
/// id, iteration index, ...).
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define DYNSPLAT_DEFINE_ERROR(Name)                    \
  class Name : public Error {                          \
   public:                                             \
    explicit Name(const std::string& message)          \
        : Error(#Name, message) {}                     \
  }

// geometry
DYNSPLAT_DEFINE_ERROR(DegenerateRotation);
DYNSPLAT_DEFINE_ERROR(NearPiRotation);
DYNSPLAT_DEFINE_ERROR(BehindCamera);

// rasters / io
DYNSPLAT_DEFINE_ERROR(OutOfBounds);
DYNSPLAT_DEFINE_ERROR(DimensionMismatch);
DYNSPLAT_DEFINE_ERROR(MissingFile);
DYNSPLAT_DEFINE_ERROR(MalformedManifest);
DYNSPLAT_DEFINE_ERROR(UnsupportedFormat);
DYNSPLAT_DEFINE_ERROR(CorruptHeader);

// initialization / optimization
DYNSPLAT_DEFINE_ERROR(EmptyRegion);
DYNSPLAT_DEFINE_ERROR(DegenerateConfiguration);
DYNSPLAT_DEFINE_ERROR(InsufficientInliers);
DYNSPLAT_DEFINE_ERROR(NonFiniteLoss);

// splatting / field
DYNSPLAT_DEFINE_ERROR(NoValidPixels);
DYNSPLAT_DEFINE_ERROR(UnknownRegion);
DYNSPLAT_DEFINE_ERROR(StaleIntermediates);

// synthetic scenes
DYNSPLAT_DEFINE_ERROR(ConfigInfeasible);

#undef DYNSPLAT_DEFINE_ERROR

}  // namespace dynsplat
