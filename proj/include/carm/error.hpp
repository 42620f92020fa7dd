#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace carm {

enum class Errc {
  NonPositiveDepth,
  DegenerateConfiguration,
  NoConvergence,
  NearParallelRays,
  InsufficientViews,
  EmptyInput,
  EmptySample,
  InsufficientHistory,
  InsufficientKeypoints,
  FrameDegenerate,
  NoMatches,
  MissingNormalizerJoints,
  UnknownPreset,
  InvalidArgument,
  ParseError,
};

std::string_view to_string(Errc code);

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace carm
