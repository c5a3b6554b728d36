// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/cli.hpp"

int main(int argc, char** argv) {
    return seqedit::run_cli(argc, argv);
}
