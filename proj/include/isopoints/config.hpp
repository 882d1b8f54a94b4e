#pragma once

#include <isopoints/fitting.hpp>
#include <isopoints/isoextract.hpp>

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace iso {

enum class Provenance { Default, File, Flag };

std::string_view to_string(Provenance p);

/// SamplerConfig and FitConfig overlaid with `key = value` settings. Keys are
/// the field names of the two structs; anything else is rejected.
class RunConfig {
 public:
  SamplerConfig sampler;
  FitConfig fit;

  /// Applies one setting. Throws PreconditionError on an unknown key or a
  /// malformed value. A file setting never overrides a flag.
  void set(std::string_view key, std::string_view value, Provenance source);

  /// One `key = value` per line; `#` starts a comment.
  void load_file(const std::string& path);
  void load_text(std::string_view text);

  Provenance provenance(std::string_view key) const;
  static std::vector<std::string> keys();

 private:
  std::map<std::string, Provenance, std::less<>> provenance_;
};

}  // namespace iso
