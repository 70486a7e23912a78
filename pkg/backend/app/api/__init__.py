# Empty __init__ file for api package
