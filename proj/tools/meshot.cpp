#include <meshot/cli.hpp>

int main(int argc, char** argv)
{
    return meshot::dispatch(argc, argv);
}
