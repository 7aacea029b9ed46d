#include "dlfd/training_log.hpp"

#include <string>

#include "dlfd/error.hpp"
#include "dlfd/text_io.hpp"

namespace dlfd {

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  std::string out = "epoch,mean_loss,max_abs_residual\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch);
    out += ',';
    out += text::format_double(e.mean_loss);
    out += ',';
    out += text::format_double(e.max_abs_residual);
    out += '\n';
  }
  text::write_file(path, out);
}

TrainingLog TrainingLog::read_csv(const std::filesystem::path& path) {
  const std::string content = text::read_file(path);
  TrainingLog log;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    std::string_view line(content.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (text::trim(line) != "epoch,mean_loss,max_abs_residual") {
        throw Error(ErrorKind::parse, path.string() + ":1: unexpected training log header");
      }
      continue;
    }
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != 3) {
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
    }
    log.epochs.push_back({static_cast<std::size_t>(text::parse_uint(fields[0])),
                          text::parse_double(fields[1]), text::parse_double(fields[2])});
  }
  return log;
}

}  // namespace dlfd
