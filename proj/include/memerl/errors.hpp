#pragma once

#include <stdexcept>
#include <string>

namespace memerl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MEMERL_DEFINE_ERROR(Name)             \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

MEMERL_DEFINE_ERROR(InvalidConfig);
MEMERL_DEFINE_ERROR(UnknownTemplate);
MEMERL_DEFINE_ERROR(UnknownToken);
MEMERL_DEFINE_ERROR(SupportMismatch);
MEMERL_DEFINE_ERROR(LengthMismatch);
MEMERL_DEFINE_ERROR(InsufficientJudges);
MEMERL_DEFINE_ERROR(GroupTooSmall);
MEMERL_DEFINE_ERROR(EmptySplit);
MEMERL_DEFINE_ERROR(MissingCotTrace);
MEMERL_DEFINE_ERROR(MissingReference);
MEMERL_DEFINE_ERROR(IncompleteRatings);
MEMERL_DEFINE_ERROR(HeaderMismatch);
MEMERL_DEFINE_ERROR(CheckpointError);
MEMERL_DEFINE_ERROR(AllUnparseable);

// Model-service failures.
MEMERL_DEFINE_ERROR(ServiceUnavailable);
MEMERL_DEFINE_ERROR(TransientFailure);  // one failed attempt; retried by the caller
MEMERL_DEFINE_ERROR(LeakageDetected);
MEMERL_DEFINE_ERROR(EmptyResponse);
MEMERL_DEFINE_ERROR(UnparseableScore);

#undef MEMERL_DEFINE_ERROR

}  // namespace memerl
