#ifndef D2RNN_ERROR_HPP
#define D2RNN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace d2rnn {

/// Broad failure category. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Usage = 1,      // bad arguments, malformed architecture strings
  Data = 2,       // schema violations, shape mismatches, bad files
  Numerical = 3,  // non-finite values, failed gradient checks
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_usage(const std::string& what) {
  throw Error(ErrorKind::Usage, what);
}

[[noreturn]] inline void throw_data(const std::string& what) {
  throw Error(ErrorKind::Data, what);
}

[[noreturn]] inline void throw_numerical(const std::string& what) {
  throw Error(ErrorKind::Numerical, what);
}

}  // namespace d2rnn

#endif  // D2RNN_ERROR_HPP
