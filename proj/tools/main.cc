#include <iostream>

#include "app/commands.h"

int main(int argc, char** argv) { return ratecert::app::Main(argc, argv, std::cout, std::cerr); }
