#ifndef VFSCORE_PHONOFEAT_TRANSCRIPT_HPP_
#define VFSCORE_PHONOFEAT_TRANSCRIPT_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vfscore/numerics/tensor.hpp"

namespace vfscore::phonofeat {

// One recognized sentence with its voice span in milliseconds.
struct TranscriptSegment {
  std::string text;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
};

enum class FluencyLabel { kFluent, kDisfluent };

FluencyLabel fluency_label_from_string(const std::string& s);
std::string to_string(FluencyLabel label);

// One student answer clip: transcript segments plus an optional prosodic
// feature row (bound from a separate table) and an optional fluency label.
struct ClipRecord {
  std::string clip_id;
  std::int64_t duration_ms = 0;
  std::vector<TranscriptSegment> segments;
  numerics::Tensor prosodic;  // empty until bound
  std::optional<FluencyLabel> label;
};

// Enforces the record invariants: positive duration, segments sorted by
// start, non-overlapping, each within [0, duration]. Throws FormatError.
void validate(const ClipRecord& clip);

// Transcript exchange format: one JSON object per line,
//   {"clip_id", "duration_ms", "segments":[{"text","start_ms","end_ms"}], "label"?}
std::vector<ClipRecord> read_transcripts_jsonl(std::istream& in);
std::vector<ClipRecord> read_transcripts_jsonl_file(const std::string& path);
void write_transcripts_jsonl(std::ostream& out,
                             const std::vector<ClipRecord>& clips);
void write_transcripts_jsonl_file(const std::string& path,
                                  const std::vector<ClipRecord>& clips);

}  // namespace vfscore::phonofeat

#endif  // VFSCORE_PHONOFEAT_TRANSCRIPT_HPP_
