#ifndef OPPLAB_ERRORS_HPP
#define OPPLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace opplab {

// Every error carries a kind so the CLI can map it to an exit code.
enum class ErrorKind { precondition, budget, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string name, const std::string& what)
        : std::runtime_error(name + ": " + what), kind_(kind), name_(std::move(name)) {}
    ErrorKind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }

private:
    ErrorKind kind_;
    std::string name_;
};

#define OPPLAB_DEFINE_ERROR(Name, Kind)                                           \
    class Name : public Error {                                                   \
    public:                                                                       \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, #Name, what) {} \
    };

OPPLAB_DEFINE_ERROR(DegenerateForm, precondition)
OPPLAB_DEFINE_ERROR(NotSymmetric, precondition)
OPPLAB_DEFINE_ERROR(InvalidArgument, precondition)
OPPLAB_DEFINE_ERROR(ParseError, precondition)
OPPLAB_DEFINE_ERROR(MethodUnavailable, precondition)
OPPLAB_DEFINE_ERROR(ZeroVolume, precondition)
OPPLAB_DEFINE_ERROR(DivergentIntegral, precondition)
OPPLAB_DEFINE_ERROR(RationalDegenerate, precondition)
OPPLAB_DEFINE_ERROR(NoResonance, precondition)
OPPLAB_DEFINE_ERROR(NotFoundWithinCap, precondition)
OPPLAB_DEFINE_ERROR(MonotonicityViolation, precondition)
OPPLAB_DEFINE_ERROR(CalibrationMissing, precondition)
OPPLAB_DEFINE_ERROR(BoxTooLarge, budget)
OPPLAB_DEFINE_ERROR(BudgetExceeded, budget)
OPPLAB_DEFINE_ERROR(NumericalBreakdown, numerical)

#undef OPPLAB_DEFINE_ERROR

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

}  // namespace opplab

#endif
