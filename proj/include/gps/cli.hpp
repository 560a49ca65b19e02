#pragma once

namespace gps {

// Entry point of the gps command line tool. Returns 0, 2 (configuration error) or 3 (numerical failure).
int run_cli(int argc, char** argv);

} // namespace gps
