#pragma once

// Row codecs for the table files. Parsers throw Error(Parse) with a message
// naming the offending column; callers attach file and line.

#include <string>
#include <vector>

#include "canopydw/model.hpp"

namespace canopydw::rows {

std::string render(const DimDate &row);
std::string render(const DimImage &row);
std::string render(const DimSpecies &row);
std::string render(const FactTreeMetric &row);
std::string render(const SurveyRecord &row);

DimDate parse_date(const std::vector<std::string> &fields);
DimImage parse_image(const std::vector<std::string> &fields);
DimSpecies parse_species(const std::vector<std::string> &fields);
FactTreeMetric parse_fact(const std::vector<std::string> &fields);
SurveyRecord parse_survey(const std::vector<std::string> &fields);

} // namespace canopydw::rows
