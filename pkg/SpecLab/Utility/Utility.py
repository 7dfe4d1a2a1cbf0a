import os
import csv
import json
import logging
import math

#----------------------------------------------

def write_data_to_csv(rows, path, filename, header):
    """
    Writes a header line and rows of already formatted cells to a CSV file.

    Args:
        rows (list): list of rows, each a list of strings
        path (str): target directory, created when missing
        filename (str): file name inside path
        header (list): column names

    Returns:
        bool: True on success, False when the file could not be written.
    """
    file_path = os.path.join(path, filename)

    try:
        if path:
            os.makedirs(path, exist_ok=True)
        with open(file_path, 'w', newline='', encoding='utf-8') as csvfile:
            csv_writer = csv.writer(csvfile, lineterminator='\n')
            csv_writer.writerow(header)

            for row in rows:
                csv_writer.writerow(row)
        logging.info(f"Data written to '{file_path}' successfully!")
        return True
    except OSError as e:
        logging.error(f"An error occurred writing '{file_path}': {e}")
        return False

#----------------------------------------------
def write_jsonl(items, path, filename):
    """Writes one JSON object per line with sorted keys. Returns True/False like write_data_to_csv."""
    file_path = os.path.join(path, filename)

    try:
        if path:
            os.makedirs(path, exist_ok=True)
        with open(file_path, 'w', encoding='utf-8') as f:
            for item in items:
                f.write(json.dumps(item, sort_keys=True, default=_json_default) + '\n')
        logging.info(f"Data written to '{file_path}' successfully!")
        return True
    except OSError as e:
        logging.error(f"An error occurred writing '{file_path}': {e}")
        return False

#----------------------------------------------
def read_jsonl(file_path):
    items = []
    with open(file_path, encoding='utf-8') as f:
        for line in f:
            line = line.strip()
            if line:
                items.append(json.loads(line))
    return items

#----------------------------------------------
def _json_default(value):
    # numpy scalars and arrays
    if hasattr(value, 'tolist'):
        return value.tolist()
    raise TypeError(f'{type(value).__name__} is not JSON serializable')

#----------------------------------------------
def format_number(value):
    """Fixed 12-significant-digit rendering used by every report file."""
    if value is None:
        return ''
    if isinstance(value, (bool, int)) and not isinstance(value, float):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return f'{value:.12g}'

#----------------------------------------------
def parse_float_list(text):
    """
    Parses a comma separated list of numbers ("0.1, 0.2,0.3").

    Raises:
        ValueError: if an item is not a number
    """
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    items = [item.strip() for item in str(text).split(',')]
    return [float(item) for item in items if item]

#----------------------------------------------
def spacings_from_inverse(text):
    """'128,256' (values of 1/h) -> [1/128, 1/256], coarsest first."""
    inverse = parse_float_list(text)
    if any(n <= 0 for n in inverse):
        raise ValueError(f'Resolutions must be positive, got {inverse}')
    return [1.0 / n for n in sorted(inverse)]
