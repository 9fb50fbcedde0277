// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(polaris::pipeline::cli::cli_main(std::env::args_os()));
}
