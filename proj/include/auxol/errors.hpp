#pragma once

#include <stdexcept>
#include <string>

namespace auxol {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define AUXOL_DEFINE_ERROR(Name)          \
    struct Name : Error {                 \
        using Error::Error;               \
    }

AUXOL_DEFINE_ERROR(DimensionMismatch);
AUXOL_DEFINE_ERROR(EmptyMask);
AUXOL_DEFINE_ERROR(InvalidArgument);
AUXOL_DEFINE_ERROR(ShapeMismatch);
AUXOL_DEFINE_ERROR(StaleCache);
AUXOL_DEFINE_ERROR(AlphaOutOfRange);
AUXOL_DEFINE_ERROR(LengthMismatch);
AUXOL_DEFINE_ERROR(EmptyBatch);
AUXOL_DEFINE_ERROR(MissingGroundTruth);
AUXOL_DEFINE_ERROR(BackendUnavailable);
AUXOL_DEFINE_ERROR(Timeout);
AUXOL_DEFINE_ERROR(MalformedResponse);
AUXOL_DEFINE_ERROR(HttpError);
AUXOL_DEFINE_ERROR(MissingMask);
AUXOL_DEFINE_ERROR(UnreadableImage);
AUXOL_DEFINE_ERROR(SizeMismatch);
AUXOL_DEFINE_ERROR(IOFailure);
AUXOL_DEFINE_ERROR(CheckpointError);

#undef AUXOL_DEFINE_ERROR

} // namespace auxol
