#pragma once

// Command-line interface:
//   formsim validate <scenario>
//   formsim run <scenario> [--dt --t-final --sign-mode --eps --scheme --out
//                           --output-stride --plot QUANTITY]
//   formsim plot <csv> --quantity Q --out FILE
//   formsim presets list | dump [DIR]
// <scenario> is a JSON file or a built-in preset name ("caseI" or
// "presets/caseI"). FORMSIM_OUT sets the default output directory. Exit code
// 0 on success, 1 on any failure, always with a message and never a stack
// dump.

#include <string>
#include <vector>

namespace formsim {

int cli_main(const std::vector<std::string>& args);
int cli_main(int argc, char** argv);

}  // namespace formsim
