#pragma once

namespace scimine::prompts {

extern const char* const kTextNerIntro;
extern const char* const kTextNerTypeSet;
extern const char* const kTextNerQuestion;
extern const char* const kTextNerDemo1Sentences;
extern const char* const kTextNerDemo1Answer;
extern const char* const kTextNerDemo2Sentences;
extern const char* const kTextNerDemo2Answer;

extern const char* const kTableNerDemo1Table;
extern const char* const kTableNerDemo1Answer;
extern const char* const kTableNerDemo2Table;
extern const char* const kTableNerDemo2Answer;

extern const char* const kTableReIntro;
extern const char* const kTableReDemo1Table;
extern const char* const kTableReDemo1Answer;
extern const char* const kTableReDemo2Table;
extern const char* const kTableReDemo2Answer;

}  // namespace scimine::prompts
