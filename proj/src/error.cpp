#include "carm/error.hpp"

namespace carm {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NonPositiveDepth: return "NonPositiveDepth";
    case Errc::DegenerateConfiguration: return "DegenerateConfiguration";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::NearParallelRays: return "NearParallelRays";
    case Errc::InsufficientViews: return "InsufficientViews";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptySample: return "EmptySample";
    case Errc::InsufficientHistory: return "InsufficientHistory";
    case Errc::InsufficientKeypoints: return "InsufficientKeypoints";
    case Errc::FrameDegenerate: return "FrameDegenerate";
    case Errc::NoMatches: return "NoMatches";
    case Errc::MissingNormalizerJoints: return "MissingNormalizerJoints";
    case Errc::UnknownPreset: return "UnknownPreset";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace carm
