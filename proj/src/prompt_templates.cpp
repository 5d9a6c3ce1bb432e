// Instruction and demonstration blocks of the few-shot prompts.
#include "prompt_templates.hpp"

namespace scimine::prompts {

const char* const kTextNerIntro =
    R"(Scientific named entity extraction is a task in natural language processing that aims to identify specific entities with semantic meaning from paper text and classify them into predefined types.

Paper text is typically segmented into sequences of tokens and each entity is labeled with a tag indicating its type. Entity types include:

Task: The specific task or problem that the paper aims to address. E.g., information extraction, machine reading comprehension, image segmentation, etc.

Model: A formal representation or abstraction of the proposed system, which can be applied to solve the specific Task. E.g., BERT, ResNet, etc.

Method: The approach, technique, and tool that is used to construct the Model to solve the Task. E.g., self-attention, data augmentation, Adam, batch normalization, etc.

Dataset: A collection of data that is used for training, validating, and testing the proposed Model. E.g., GLUE, COCO, CoNLL-2003, etc.

Metric: A quantitative measure or evaluation criterion that is used to assess the performance or quality of a Model. E.g., accuracy, F1 score, etc.)";

const char* const kTextNerTypeSet =
    R"(Given type set: [Task, Model, Method, Dataset, Metric].)";

const char* const kTextNerQuestion =
    R"(Question: Please extract the named entity from the given sentences. Based on the given label set, provide the extraction results in the format: [[Entity Name, Entity Type]] without any additional things including your explanations or notes. If there is no entity in the given sentence, please return a null list like [].)";

const char* const kTextNerDemo1Sentences =
    R"(Our task is to classify images in the CIFAR-10 dataset into their respective classes, which include animals, vehicles, and household items. This task has practical applications in areas such as autonomous driving, object recognition, and image search. In this paper, we propose a novel approach for image classification using a deep learning model based on the EfficientNet architecture and transfer learning techniques. Our proposed model, named EfficientNet-Transfer, is a modified version of the EfficientNet-B0 architecture that has been pre-trained on the ImageNet dataset and fine-tuned on our target dataset. We use the CIFAR-10 dataset, which contains 60,000 32x32 pixel color images in 10 classes, as our target dataset. We evaluate our model using classification accuracy, precision, recall, and F1-score.)";

const char* const kTextNerDemo1Answer =
    R"([['CIFAR-10', 'Dataset'], ['autonomous driving', 'Task'], ['object recognition', 'Task'], ['image search', 'Task'], ['image classification', 'Task'], ['EfficientNet', 'Method'], ['transfer learning', 'Method'], ['EfficientNet-Transfer', 'Model'], ['EfficientNet-B0', 'Model'], ['ImageNet', 'Dataset'], ['accuracy', 'Metric'], ['precision', 'Metric'], ['recall', 'Metric'], ['F1-score', 'Metric']])";

const char* const kTextNerDemo2Sentences =
    R"(We perform sentiment analysis on movie reviews using deep learning techniques. We propose AttRNN, a novel model architecture based on a recurrent neural network (RNN) with attention mechanisms. Our model integrates both word-level and sentence-level attention mechanisms to improve its discriminative power and capture more relevant features from the input text. We evaluate our proposed model on the Movie Review Sentiment Analysis dataset, which consists of 50,000 movie reviews labeled as positive or negative. We use the accuracy metric to measure the performance of our model, which is defined as the percentage of correctly classified movie reviews in the test set. We also report the F1-score, which takes into account both precision and recall of the positive and negative classes.)";

const char* const kTextNerDemo2Answer =
    R"([['sentiment analysis', 'Task'], ['AttRNN', 'Model'], ['recurrent neural network', 'Method'], ['RNN', 'Method'], ['word-level and sentence-level attention mechanisms', 'Method'], ['attention mechanisms', 'Method'], ['Movie Review', 'Dataset'], ['accuracy', 'Metric'], ['F1-score', 'Metric']])";

const char* const kTableNerDemo1Table =
    R"([['System', 'MNLI-(m/mm)', 'QQP', 'QNLI', 'SST-2', 'CoLA', 'STS-B', 'MRPC', 'RTE', 'Average'], ['', '392k', '363k', '108k', '67k', '8.5k', '5.7k', '3.5k', '2.5k', '-'], ['Pre-OpenAI SOTA', '80.6/80.1', '66.1', '82.3', '93.2', '35.0', '81.0', '86.0', '61.7', '74.0'], ['BiLSTM+ELMo+Attn', '76.4/76.1', '64.8', '79.8', '90.4', '36.0', '73.3', '84.9', '56.8', '71.0'], ['OpenAI GPT', '82.1/81.4', '70.3', '87.4', '91.3', '45.4', '80.0', '82.3', '56.0', '75.1'], ['bertbase', '84.6/83.4', '71.2', '90.5', '93.5', '52.1', '85.8', '88.9', '66.4', '79.6'], ['bertlarge', '86.7/85.9', '72.1', '92.7', '94.9', '60.5', '86.5', '89.3', '70.1', '82.1']])";

const char* const kTableNerDemo1Answer =
    R"({'Task': ['QQP', 'MRPC'], 'Dataset': ['MNLI-(m/mm)', 'QQP', 'QNLI', 'SST-2', 'CoLA', 'STS-B', 'MRPC ', 'RTE', 'Average', 'GLUE Test', 'WNLI set', 'STS-B'], 'Model': ['Pre-OpenAI', 'BiLSTM+ELMo+Attn', 'OpenAI GPT', 'bertbase', 'bertlarge', 'BERT', 'OpenAI GPT', 'BERT'], 'Method': [], 'Metric': ['F1 scores', 'Spearman correlations', 'accuracy scores'], 'Setting': []})";

const char* const kTableNerDemo2Table =
    R"([['System', 'Dev', 'Dev', 'Test', "Test'], ['', 'EM', 'F1', 'EM', 'F1'], ['Top Leaderboard Systems (Dec 10th, 2018)', 'Top Leaderboard Systems (Dec 10th, 2018)', 'Top Leaderboard Systems (Dec 10th, 2018)', 'Top Leaderboard Systems (Dec 10th, 2018)', 'Top Leaderboard Systems (Dec 10th, 2018)'], ['Human', '-', '-', '82.3', '91.2'], ['#1 Ensemble - nlnet', '-', '-', '86.0', '91.7'], ['#2 Ensemble - QANet', '-', '-', '84.5', "90.5'], ['Published', 'Published', 'Published', 'Published', 'Published'], ['BiDAF+ELMo (Single)', '-', "85.6', '-', '85.8'], ['R.M. Reader (Ensemble)', '81.2', '87.9', '82.3', '88.5'], ['Ours', 'Ours', 'Ours', 'Ours', 'Ours'], ['bertbase(Single)', '80.8', '88.5', '-', '-'], ['bertlarge(Single)', '84.1', '90.9', '-', '-'], ['bertlarge(Ensemble)', '85.8', '91.8', '-', '-'], ['bertlarge(Sgl.+TriviaQA)', '84.2', '91.1', '85.1', '91.8'], ['bertlarge(Ens.+TriviaQA)', '86.2', '92.2', '87.4', '93.2']])";

const char* const kTableNerDemo2Answer =
    R"({'Task': [], 'Dataset': ['Dev', 'Test', 'SQuAD 1.1'], 'Model': ['Human', '#1 Ensemble-nlnet', '#2 Ensemble - QANet', 'BiDAF+ELMo (Single)', 'R.M. Reader (Ensemble)', 'bertbase', 'bertlarge', 'bertlarge', 'bertlarge', 'bertlarge', 'BERT ensemble'], 'Method': [], 'Metric': ['EM', 'F1', 'EM', 'F1'], 'Setting': ['Top Leaderboard Systems (Dec 10th, 2018)', 'Published', 'Ours', 'Single', 'Single', 'Ensemble', 'Sgl.+TriviaQA', 'Ens.+TriviaQA']})";

const char* const kTableReIntro =
    R"(Considering relations between cells in tables:)";

const char* const kTableReDemo1Table =
    R"([['System', 'MNLI-(m/mm)', 'QQP', 'QNLI', 'SST-2', 'CoLA', 'STS-B', 'MRPC', 'RTE', 'Average'], ['', '392k', '363k', '108k', '67k', '8.5k', '5.7k', '3.5k', '2.5k', '-'], ['Pre-OpenAI SOTA', '80.6/80.1', '66.1', '82.3', '93.2', '35.0', '81.0', '86.0', '61.7', '74.0'], ['BiLSTM+ELMo+Attn', '76.4/76.1', '64.8', '79.8', '90.4', '36.0', '73.3', '84.9', '56.8', '71.0'], ['OpenAI GPT', '82.1/81.4', '70.3', '87.4', '91.3', '45.4', '80.0', '82.3', '56.0', '75.1'], ['bertbase', '84.6/83.4', '71.2', '90.5', '93.5', '52.1', '85.8', '88.9', '66.4', '79.6'], ['bertlarge', '86.7/85.9', '72.1', '92.7', '94.9', '60.5', '86.5', '89.3', '70.1', '82.1']])";

const char* const kTableReDemo1Answer =
    R"({['Pre-OpenAI SOTA':'MNLI-(m/mm)', 'Pre-OpenAI SOTA':'QQP','Pre-OpenAI SOTA':'QNLI','Pre-OpenAI SOTA':'SST-2', 'Pre-OpenAI SOTA':'CoLA', 'Pre-OpenAI SOTA':'STS-B', 'Pre-OpenAI SOTA':'MRPC', 'Pre-OpenAI SOTA':'RTE', 'Pre-OpenAI SOTA':'Average', 'Pre-OpenAI SOTA':'80.6/80.1','Pre-OpenAI SOTA':'66.1','Pre-OpenAI SOTA':'82.3','Pre-OpenAI SOTA':'93.2','Pre-OpenAI SOTA': '35.0','Pre-OpenAI SOTA':'81.0','Pre-OpenAI SOTA':'86.0','Pre-OpenAI SOTA':'61.7', 'Pre-OpenAI SOTA':'74.0']})";

const char* const kTableReDemo2Table =
    R"([['System', 'Dev', 'Dev', 'Test', 'Test'], ['', 'EM', 'F1', 'EM', 'F1'], ['Top Leaderboard Systems (Dec 10th, 2018)', 'Top Leaderboard Systems (Dec 10th, 2018)', 'Top Leaderboard Systems (Dec 10th, 2018)', 'Top Leaderboard Systems (Dec 10th, 2018)', 'Top Leaderboard Systems (Dec 10th, 2018)'], ['Human', '-', '-', '82.3', '91.2'], ['#1 Ensemble - nlnet', '-', '-', '86.0', '91.7'], ['#2 Ensemble - QANet', '-', '-', '84.5', "90.5'], ['Published', 'Published', 'Published', 'Published', 'Published'], ['BiDAF+ELMo (Single)', '-', "85.6', '-', '85.8'], ['R.M. Reader (Ensemble)', '81.2', '87.9', '82.3', '88.5'], ['Ours', 'Ours', 'Ours', 'Ours', 'Ours'], ['bertbase(Single)', '80.8', '88.5', '-', '-'], ['bertlarge(Single)', '84.1', '90.9', '-', '-'], ['bertlarge(Ensemble)', '85.8', '91.8', '-', '-'], ['bertlarge(Sgl.+TriviaQA)', '84.2', '91.1', '85.1', '91.8'], ['bertlarge(Ens.+TriviaQA)', '86.2', '92.2', '87.4', '93.2']])";

const char* const kTableReDemo2Answer =
    R"({['#1 Ensemble - nlnet':'Dev', '#1 Ensemble - nlnet':'EM', '#1 Ensemble - nlnet': 'Top Leaderboard Systems (Dec 10th, 2018)', '#1 Ensemble - nlnet': '86.0', '#1 Ensemble - nlnet': 'Test','#1 Ensemble - nlnet':'F1', '#1 Ensemble - nlnet': '91.7' ]})";


}  // namespace scimine::prompts
