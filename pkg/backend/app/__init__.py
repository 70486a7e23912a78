# Empty __init__ file for app package
