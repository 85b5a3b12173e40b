#pragma once
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mivs::csv {

struct Table
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column, or -1.
    int column(std::string_view name) const;
};

// Comma separated, first line is the header. Surrounding whitespace and
// double quotes around a field are stripped; embedded commas are not
// supported. Throws InputError on ragged rows or unreadable files.
Table read(const std::string& path);
Table parse(std::istream& in, const std::string& source_name);

double to_double(const std::string& field, const std::string& context);

// Shortest decimal text that round-trips to the same double.
std::string format(double value);

} // namespace mivs::csv
